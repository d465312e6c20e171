#include "flowpatch/flow/estimator.hpp"

namespace flowpatch::flow {

diff::StageTape estimator_tape(const FlowEstimator& estimator) {
  diff::StageTape tape;
  estimator.append_stages(tape);
  return tape;
}

std::pair<Image, Image> estimator_backward(const diff::StageTape& tape, const FlowField& cotangent) {
  auto [first, second] = unstack_pair(tape.run_backward(cotangent));
  return {Image(std::move(first)), Image(std::move(second))};
}

}  // namespace flowpatch::flow
