#include <mutex>

#include "biggp/covariance.hpp"
#include "biggp/error.hpp"
#include "worker.hpp"

namespace biggp::detail {

namespace {

template <class Op>
LocalObject elementwise(const LocalObject& a, const LocalObject* b, Op op) {
  LocalObject out;
  out.layout = a.layout;
  if (!a.distributed()) {
    if (b && b->distributed())
      raise(ErrorKind::DimensionMismatch, "replicated first input with distributed second input");
    out.values = a.values;
    if (b && b->values.size() != 1 && b->values.size() != a.values.size())
      raise(ErrorKind::DimensionMismatch, "replicated inputs differ in length");
    for (std::size_t i = 0; i < out.values.size(); ++i)
      out.values[i] = op(a.values[i], b ? b->values[b->values.size() == 1 ? 0 : i] : 0.0);
    return out;
  }
  if (b && b->distributed() && !(*b->layout == *a.layout))
    raise(ErrorKind::DimensionMismatch, "inputs have different layouts");
  if (b && !b->distributed() && b->values.size() != 1)
    raise(ErrorKind::DimensionMismatch, "replicated second input must be a scalar");
  for (const auto& [idx, blk] : a.blocks) {
    Block r = blk;
    if (b && b->distributed()) {
      const Block& other = b->blocks.at(idx);
      for (Index k = 0; k < r.size(); ++k) r.data()[k] = op(r.data()[k], other.data()[k]);
    } else {
      double s = b ? b->values[0] : 0.0;
      for (Index k = 0; k < r.size(); ++k) r.data()[k] = op(r.data()[k], s);
    }
    out.blocks.emplace(idx, std::move(r));
  }
  return out;
}

RemoteFunction unary(double (*op)(double)) {
  return [op](const LocalObject& a, const LocalObject*, const WorkerInfo&) {
    return elementwise(a, nullptr, [op](double x, double) { return op(x); });
  };
}

template <class Op>
RemoteFunction binary(Op op) {
  return [op](const LocalObject& a, const LocalObject* b, const WorkerInfo&) {
    if (!b) raise(ErrorKind::InvalidArgument, "function needs two inputs");
    return elementwise(a, b, op);
  };
}

}  // namespace

void register_builtins() {
  static std::once_flag once;
  std::call_once(once, [] {
    register_function("copy", unary([](double x) { return x; }));
    register_function("negate", unary([](double x) { return -x; }));
    register_function("add", binary([](double x, double y) { return x + y; }));
    register_function("subtract", binary([](double x, double y) { return x - y; }));
    register_function("multiply", binary([](double x, double y) { return x * y; }));
    register_function("scale", binary([](double x, double s) { return x * s; }));
    register_covariance_generators();
  });
}

}  // namespace biggp::detail
