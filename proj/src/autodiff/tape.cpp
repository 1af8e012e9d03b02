#include "wstan/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>

#include "wstan/error.hpp"

namespace wstan::ad {

Tensor Tape::emit(std::string_view op, Shape shape, std::vector<double> values,
                  bool needs_grad, BackwardFn backward) {
  for (double v : values)
    if (!std::isfinite(v))
      throw NumericError("non-finite value produced by op '" +
                         std::string(op) + "'");
  Tensor out(std::move(shape), std::move(values), false);
  if (needs_grad) {
    out.node_->requires_grad = true;
    records_.push_back(Record{std::string(op), out, std::move(backward)});
  }
  return out;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw PreconditionError("backward() needs a scalar loss, got shape " +
                            (loss.defined() ? shape_string(loss.shape())
                                            : std::string("<undefined>")));
  if (!loss.requires_grad()) return;
  if (loss.trainable()) {
    loss.node().ensure_grad()[0] += 1.0;
    return;
  }
  const auto it = std::find_if(records_.begin(), records_.end(), [&](const Record& r) {
    return r.output.same_storage(loss);
  });
  if (it == records_.end())
    throw PreconditionError("backward(): loss was not recorded on this tape");

  for (auto& r : records_) {
    auto& g = r.output.node().ensure_grad();
    std::fill(g.begin(), g.end(), 0.0);
  }
  loss.node().grad[0] = 1.0;

  for (auto rit = std::make_reverse_iterator(it + 1); rit != records_.rend(); ++rit) {
    const auto& g = rit->output.node().grad;
    if (std::all_of(g.begin(), g.end(), [](double v) { return v == 0.0; })) continue;
    for (double v : g)
      if (!std::isfinite(v))
        throw NumericError("non-finite gradient reaching op '" + rit->op + "'");
    rit->backward(g);
  }
}

std::vector<std::string> Tape::op_names() const {
  std::vector<std::string> names;
  names.reserve(records_.size());
  for (const auto& r : records_) names.push_back(r.op);
  return names;
}

}  // namespace wstan::ad
