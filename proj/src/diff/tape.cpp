#include "flowpatch/diff/tape.hpp"

#include "flowpatch/core/error.hpp"

namespace flowpatch::diff {

void StageTape::push(StagePtr stage) {
  stages_.push_back(std::move(stage));
  clear_contexts();
}

void StageTape::append(const StageTape& other) {
  stages_.insert(stages_.end(), other.stages_.begin(), other.stages_.end());
  clear_contexts();
}

void StageTape::clear_contexts() {
  contexts_.clear();
  recorded_ = false;
}

Raster StageTape::run_forward(const Raster& input) {
  clear_contexts();
  contexts_.resize(stages_.size());
  Raster value = input;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    contexts_[i].input_shape = value.shape();
    value = stages_[i]->forward(value, contexts_[i]);
  }
  output_shape_ = value.shape();
  recorded_ = true;
  return value;
}

Raster StageTape::run_inference(const Raster& input) const {
  Raster value = input;
  for (const auto& stage : stages_) {
    StageContext scratch;
    scratch.input_shape = value.shape();
    value = stage->forward(value, scratch);
  }
  return value;
}

Raster StageTape::run_backward(const Raster& cotangent) const {
  if (!recorded_) throw StateError("run_backward called before run_forward");
  require_same_shape(cotangent.shape(), output_shape_, "tape output cotangent");
  Raster grad = cotangent;
  for (std::size_t i = stages_.size(); i-- > 0;) {
    grad = stages_[i]->backward(contexts_[i], grad);
    if (!(grad.shape() == contexts_[i].input_shape)) {
      throw ShapeError("stage '" + stages_[i]->name() + "' returned cotangent " + to_string(grad.shape()) +
                       " for input " + to_string(contexts_[i].input_shape));
    }
  }
  return grad;
}

}  // namespace flowpatch::diff
