#include "biggp/distla.hpp"

#include "biggp/error.hpp"
#include "biggp/object_store.hpp"
#include "worker.hpp"

namespace biggp {

using nlohmann::json;
using detail::layout_to_json;

namespace {

int resolve_h(const Cluster& cluster, Index n, int h) {
  if (h < 0) raise(ErrorKind::InvalidArgument, "replication factor must be positive");
  return h > 0 ? h : default_replication(n, cluster.grid().order());
}

BlockLayout dimension(const Cluster& cluster, Index n, int h) {
  if (n < 1) raise(ErrorKind::DimensionMismatch, "object dimensions must be positive");
  return BlockLayout(n, resolve_h(cluster, n, h), cluster.grid().order());
}

// Runs one output-producing collective; a failure leaves no partial output.
template <class Fn>
auto producing(Cluster& cluster, const std::string& output, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ClusterDown && e.kind() != ErrorKind::WorkerCrashed &&
        cluster.running()) {
      try {
        cluster.remove(output);
      } catch (const Error&) {
      }
    }
    throw;
  }
}

DistObject registered(Cluster& cluster, const std::string& name, const DistLayout& layout) {
  cluster.register_layout(name, layout);
  return {name, layout};
}

Block extract_block(const Matrix& a, const DistLayout& layout, BlockIndex b) {
  const bool vector = layout.kind() == ObjectKind::Vector;
  Block blk = Block::Zero(layout.block_rows(), layout.block_cols());
  Index r0 = layout.rows().first(b.row) - 1;
  Index c0 = vector ? 0 : layout.cols().first(b.col) - 1;
  const bool symmetric_block = layout.kind() == ObjectKind::Triangular && b.row == b.col;
  for (Index jj = 0; jj < blk.cols(); ++jj)
    for (Index ii = 0; ii < blk.rows(); ++ii) {
      Index i = r0 + ii, j = c0 + jj;
      if (i >= a.rows() || j >= a.cols()) continue;
      blk(ii, jj) = symmetric_block && ii < jj ? a(j, i) : a(i, j);
    }
  reset_padding(blk, b, layout);
  return blk;
}

}  // namespace

DistLayout triangular_layout(const Cluster& cluster, Index n, int h) {
  return DistLayout::triangular(dimension(cluster, n, h));
}

DistLayout rectangular_layout(const Cluster& cluster, Index rows, Index cols, int hn, int hm) {
  return DistLayout::rectangular(dimension(cluster, rows, hn), dimension(cluster, cols, hm));
}

DistLayout vector_layout(const Cluster& cluster, Index n, int h) {
  return DistLayout::vector(dimension(cluster, n, h));
}

DistObject distribute(Cluster& cluster, const std::string& name, const Matrix& value,
                      const DistLayout& layout) {
  Index cols = layout.kind() == ObjectKind::Vector ? 1 : layout.cols().size();
  if (value.rows() != layout.rows().size() || value.cols() != cols)
    raise(ErrorKind::DimensionMismatch, "value does not match the layout dimensions");
  if (layout.rows().grid_order() != cluster.grid().order())
    raise(ErrorKind::DimensionMismatch, "layout was built for a different grid");
  const ProcessGrid& grid = cluster.grid();
  auto payload = [&](int rank) {
    std::vector<double> out;
    for (BlockIndex b : layout.owned_blocks(grid.coord(rank), grid)) {
      Block blk = extract_block(value, layout, b);
      out.insert(out.end(), blk.data(), blk.data() + blk.size());
    }
    return out;
  };
  producing(cluster, name, [&] {
    cluster.collective("distribute", {{"name", name}, {"layout", layout_to_json(layout)}}, payload);
    return 0;
  });
  return registered(cluster, name, layout);
}

DistObject distribute_vector(Cluster& cluster, const std::string& name,
                             std::span<const double> x, int h) {
  DistLayout layout = vector_layout(cluster, static_cast<Index>(x.size()), h);
  Matrix v = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Index>(x.size()));
  return distribute(cluster, name, v, layout);
}

Matrix collect(Cluster& cluster, const std::string& name) {
  const DistLayout layout = cluster.layout_of(name);
  const ProcessGrid& grid = cluster.grid();
  auto replies = cluster.collective("pull", {{"name", name}});
  const bool vector = layout.kind() == ObjectKind::Vector;
  const Index nrows = layout.rows().size();
  const Index ncols = vector ? 1 : layout.cols().size();
  Matrix out = Matrix::Zero(nrows, ncols);
  for (const auto& reply : replies) {
    std::size_t offset = 0;
    for (BlockIndex b : layout.owned_blocks(grid.coord(reply.rank), grid)) {
      const auto size = static_cast<std::size_t>(layout.block_rows() * layout.block_cols());
      if (offset + size > reply.payload.size())
        raise(ErrorKind::Internal, "collected payload is shorter than the layout");
      Eigen::Map<const Block> blk(reply.payload.data() + offset, layout.block_rows(),
                                  layout.block_cols());
      offset += size;
      Index r0 = layout.rows().first(b.row) - 1;
      Index c0 = vector ? 0 : layout.cols().first(b.col) - 1;
      const bool lower_only = layout.kind() == ObjectKind::Triangular && b.row == b.col;
      for (Index jj = 0; jj < blk.cols(); ++jj)
        for (Index ii = lower_only ? jj : 0; ii < blk.rows(); ++ii) {
          Index i = r0 + ii, j = c0 + jj;
          if (i < nrows && j < ncols) out(i, j) = blk(ii, jj);
        }
    }
  }
  return out;
}

std::vector<double> collect_vector(Cluster& cluster, const std::string& name) {
  if (cluster.layout_of(name).kind() != ObjectKind::Vector)
    raise(ErrorKind::DimensionMismatch, "'" + name + "' is not a vector");
  Matrix m = collect(cluster, name);
  return {m.data(), m.data() + m.size()};
}

std::vector<double> collect_diagonal(Cluster& cluster, const std::string& name) {
  const DistLayout layout = cluster.layout_of(name);
  if (layout.kind() == ObjectKind::Rectangular)
    raise(ErrorKind::DimensionMismatch, "collect_diagonal needs a triangular or vector object");
  const ProcessGrid& grid = cluster.grid();
  auto replies = cluster.collective("diag", {{"name", name}});
  const Index n = layout.rows().size();
  std::vector<double> out(static_cast<std::size_t>(n));
  const Index bs = layout.block_rows();
  for (const auto& reply : replies) {
    std::size_t offset = 0;
    for (BlockIndex b : layout.owned_blocks(grid.coord(reply.rank), grid)) {
      if (layout.kind() == ObjectKind::Triangular && b.row != b.col) continue;
      Index first = layout.rows().first(b.row) - 1;
      for (Index t = 0; t < bs; ++t, ++offset)
        if (first + t < n) out[static_cast<std::size_t>(first + t)] = reply.payload.at(offset);
    }
  }
  return out;
}

DistObject construct_distributed(Cluster& cluster, const std::string& name,
                                 const DistLayout& layout, const std::string& generator,
                                 std::span<const double> theta,
                                 const std::map<std::string, std::string>& inputs, bool diagonal) {
  if (diagonal && layout.kind() != ObjectKind::Vector)
    raise(ErrorKind::InvalidArgument, "diagonal construction needs a vector layout");
  json in = json::object();
  for (const auto& [key, object] : inputs) in[key] = object;
  json args = {{"name", name},
               {"layout", layout_to_json(layout)},
               {"generator", generator},
               {"theta", std::vector<double>(theta.begin(), theta.end())},
               {"inputs", in},
               {"diagonal", diagonal}};
  producing(cluster, name, [&] { return cluster.collective("construct", args); });
  return registered(cluster, name, layout);
}

DistObject construct_rnorm(Cluster& cluster, const std::string& name, const DistLayout& layout,
                           bool zero) {
  if (layout.kind() == ObjectKind::Triangular)
    raise(ErrorKind::InvalidArgument, "random objects are vectors or rectangular matrices");
  producing(cluster, name, [&] {
    return cluster.collective("rnorm",
                              {{"name", name}, {"layout", layout_to_json(layout)}, {"zero", zero}});
  });
  return registered(cluster, name, layout);
}

DistObject cholesky(Cluster& cluster, const std::string& input, const std::string& output) {
  const DistLayout layout = cluster.layout_of(input);
  if (layout.kind() != ObjectKind::Triangular)
    raise(ErrorKind::DimensionMismatch, "Cholesky needs a triangular object");
  auto replies = producing(cluster, output, [&] {
    return cluster.collective("chol", {{"input", input}, {"output", output}});
  });
  std::vector<KernelStats> stats;
  for (const auto& r : replies)
    stats.push_back({r.rank, r.info.at("owned").get<long>(), r.info.at("peak").get<long>()});
  cluster.set_kernel_stats(std::move(stats));
  return registered(cluster, output, layout);
}

DistObject triangular_solve(Cluster& cluster, const std::string& factor, const std::string& rhs,
                            const std::string& output, Side side) {
  const DistLayout layout = cluster.layout_of(rhs);
  producing(cluster, output, [&] {
    return cluster.collective("solve", {{"factor", factor},
                                        {"rhs", rhs},
                                        {"output", output},
                                        {"side", side == Side::Forward ? "forward" : "back"}});
  });
  return registered(cluster, output, layout);
}

DistObject mult_chol(Cluster& cluster, const std::string& factor, const std::string& x,
                     const std::string& output) {
  const DistLayout layout = cluster.layout_of(x);
  producing(cluster, output, [&] {
    return cluster.collective("mult_chol", {{"factor", factor}, {"rhs", x}, {"output", output}});
  });
  return registered(cluster, output, layout);
}

DistObject crossprod_mat_vec(Cluster& cluster, const std::string& v, const std::string& u,
                             const std::string& output) {
  const DistLayout layout = DistLayout::vector(cluster.layout_of(v).cols());
  producing(cluster, output, [&] {
    return cluster.collective("crossprod_vec", {{"matrix", v}, {"vector", u}, {"output", output}});
  });
  return registered(cluster, output, layout);
}

DistObject crossprod_self(Cluster& cluster, const std::string& v, const std::string& output) {
  const DistLayout layout = DistLayout::triangular(cluster.layout_of(v).cols());
  producing(cluster, output, [&] {
    return cluster.collective("crossprod_self", {{"matrix", v}, {"output", output}});
  });
  return registered(cluster, output, layout);
}

DistObject crossprod_self_diag(Cluster& cluster, const std::string& v, const std::string& output) {
  const DistLayout layout = DistLayout::vector(cluster.layout_of(v).cols());
  producing(cluster, output, [&] {
    return cluster.collective("crossprod_diag", {{"matrix", v}, {"output", output}});
  });
  return registered(cluster, output, layout);
}

double log_det_from_chol(Cluster& cluster, const std::string& factor) {
  double sum = 0.0;
  for (const auto& r : cluster.collective("logdet", {{"factor", factor}})) sum += r.payload.at(0);
  return sum;
}

double sum_of_squares(Cluster& cluster, const std::string& name) {
  double sum = 0.0;
  for (const auto& r : cluster.collective("sumsq", {{"name", name}})) sum += r.payload.at(0);
  return sum;
}

std::vector<ElementIndex> remote_get_indices(Cluster& cluster, const DistLayout& layout, int rank) {
  auto replies = cluster.collective("indices", {{"layout", layout_to_json(layout)}}, {}, {rank});
  const auto& p = replies.front().payload;
  std::vector<ElementIndex> out;
  for (std::size_t k = 0; k + 2 < p.size(); k += 3)
    out.push_back({static_cast<Index>(p[k]), static_cast<Index>(p[k + 1]), p[k + 2] != 0.0});
  return out;
}

std::vector<double> worker_standard_normals(Cluster& cluster, int rank, std::size_t count) {
  auto replies = cluster.collective("draws", {{"count", count}}, {}, {rank});
  return std::move(replies.front().payload);
}

}  // namespace biggp
