// Worker-side distributed kernels.
//
// Every kernel enumerates the same global sequence of block tasks on all
// workers and executes only the tasks it owns, in sequence order. Produced
// blocks are sent as soon as they are final; sends never block, and every
// dependency points to an earlier task, so the lowest unfinished task can
// always run. Reductions are applied in a fixed order, which makes results
// independent of message timing.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "biggp/error.hpp"
#include "worker.hpp"

namespace biggp::detail {

namespace {

using Map = Eigen::Map<const Block>;

const LocalObject& distributed(Worker& w, const std::string& name) {
  const LocalObject& obj = w.store().get(name);
  if (!obj.distributed())
    raise(ErrorKind::DimensionMismatch, "'" + name + "' is not a distributed object");
  return obj;
}

int owner_rank(const Worker& w, const DistLayout& layout, BlockIndex b) {
  return w.rank_of(layout.owner(b, w.grid()));
}

void check_diagonal(const Block& l, int block) {
  for (Index t = 0; t < l.rows(); ++t)
    if (l(t, t) == 0.0)
      throw Error(ErrorKind::SingularDiagonal,
                  "zero on the diagonal of block " + std::to_string(block), std::nullopt, block);
}

// ---------------------------------------------------------------- construct

json kernel_construct(Worker& w, const json& args, const std::vector<double>&,
                      std::vector<double>&) {
  DistLayout layout = layout_from_json(args.at("layout"), w.grid().order());
  const Generator& gen = find_generator(args.at("generator").get<std::string>());
  auto theta = args.at("theta").get<std::vector<double>>();
  bool diagonal = args.value("diagonal", false);
  GeneratorInputs inputs;
  for (const auto& [key, value] : args.at("inputs").items()) {
    const LocalObject& obj = w.store().get(value.get<std::string>());
    if (obj.distributed())
      raise(ErrorKind::InvalidArgument, "generator input '" + key + "' must be replicated");
    inputs[key] = obj.values;
  }

  const bool vector = layout.kind() == ObjectKind::Vector;
  const Index ncols = vector ? 1 : layout.cols().size();
  LocalObject out;
  out.layout = layout;
  std::vector<ElementIndex> idx;
  std::vector<std::pair<Index, Index>> pos;
  std::vector<double> vals;
  for (BlockIndex b : layout.owned_blocks(w.coord(), w.grid())) {
    Block blk = Block::Zero(layout.block_rows(), layout.block_cols());
    Index r0 = layout.rows().first(b.row);
    Index c0 = vector ? 1 : layout.cols().first(b.col);
    bool lower_only = layout.kind() == ObjectKind::Triangular && b.row == b.col;
    idx.clear();
    pos.clear();
    for (Index jj = 0; jj < blk.cols(); ++jj)
      for (Index ii = lower_only ? jj : 0; ii < blk.rows(); ++ii) {
        Index i = r0 + ii, j = c0 + jj;
        if (i > layout.rows().size() || j > ncols) continue;
        idx.push_back({i, diagonal ? i : j, false});
        pos.emplace_back(ii, jj);
      }
    vals.assign(idx.size(), 0.0);
    try {
      gen(theta, inputs, idx, vals);
    } catch (const Error&) {
      throw;
    } catch (const std::exception& e) {
      raise(ErrorKind::GeneratorError, e.what());
    }
    for (std::size_t k = 0; k < vals.size(); ++k) {
      if (!std::isfinite(vals[k]))
        raise(ErrorKind::GeneratorError, "non-finite value at (" + std::to_string(idx[k].row) +
                                             "," + std::to_string(idx[k].col) + ")");
      auto [ii, jj] = pos[k];
      blk(ii, jj) = vals[k];
      if (lower_only) blk(jj, ii) = vals[k];
    }
    reset_padding(blk, b, layout);
    w.log("construct", b.row, b.col);
    out.blocks.emplace(b, std::move(blk));
  }
  w.store().put(args.at("name").get<std::string>(), std::move(out));
  return {};
}

json kernel_distribute(Worker& w, const json& args, const std::vector<double>& payload,
                       std::vector<double>&) {
  DistLayout layout = layout_from_json(args.at("layout"), w.grid().order());
  LocalObject out;
  out.layout = layout;
  std::size_t offset = 0;
  const auto per_block = static_cast<std::size_t>(layout.block_rows() * layout.block_cols());
  for (BlockIndex b : layout.owned_blocks(w.coord(), w.grid())) {
    if (offset + per_block > payload.size())
      raise(ErrorKind::DimensionMismatch, "distributed payload is too short");
    Block blk = Map(payload.data() + offset, layout.block_rows(), layout.block_cols());
    offset += per_block;
    reset_padding(blk, b, layout);
    out.blocks.emplace(b, std::move(blk));
  }
  if (offset != payload.size()) raise(ErrorKind::DimensionMismatch, "distributed payload is too long");
  w.store().put(args.at("name").get<std::string>(), std::move(out));
  return {};
}

// Diagonal entries of owned diagonal blocks (triangular) or the vector pieces.
json kernel_diag(Worker& w, const json& args, const std::vector<double>&,
                 std::vector<double>& reply) {
  const LocalObject& obj = distributed(w, args.at("name").get<std::string>());
  const DistLayout& layout = *obj.layout;
  for (BlockIndex b : layout.owned_blocks(w.coord(), w.grid())) {
    const Block& blk = obj.blocks.at(b);
    if (layout.kind() == ObjectKind::Vector) {
      reply.insert(reply.end(), blk.data(), blk.data() + blk.size());
    } else if (layout.kind() == ObjectKind::Triangular && b.row == b.col) {
      for (Index t = 0; t < blk.rows(); ++t) reply.push_back(blk(t, t));
    } else if (layout.kind() == ObjectKind::Rectangular) {
      raise(ErrorKind::DimensionMismatch, "collect_diagonal needs a triangular or vector object");
    }
  }
  return {};
}

// ----------------------------------------------------------------- Cholesky

struct CholTask {
  enum class Kind { Factor, Solve, Update };
  Kind kind;
  int owner;
  Phase phase;
  std::vector<BlockIndex> targets;
  std::vector<BlockIndex> inputs;
};

void add_input(std::vector<BlockIndex>& inputs, BlockIndex b) {
  if (std::find(inputs.begin(), inputs.end(), b) == inputs.end()) inputs.push_back(b);
}

/**
 * Task sequence of the two-level factorization.
 *
 * The outer loop walks the h large block columns. Within large column K,
 * each block column k is factored on its diagonal owner, solved down the
 * column, and applied to the remaining blocks of large column K. The
 * trailing large blocks (L, M) are then updated one sub-column at a time;
 * each owner takes the at most four factor blocks its sub-blocks need.
 */
std::vector<CholTask> chol_plan(const DistLayout& layout, const ProcessGrid& grid) {
  const int d = grid.order();
  const int h = layout.rows().replication();
  const int nb = layout.row_blocks();
  auto owner = [&](int i, int j) { return grid.rank(block_owner({i, j}, grid)); };
  std::vector<CholTask> tasks;
  for (int big = 1; big <= h; ++big) {
    const int c0 = (big - 1) * d + 1, c1 = big * d;
    for (int k = c0; k <= c1; ++k) {
      tasks.push_back({CholTask::Kind::Factor, owner(k, k), Phase::CholFactor, {{k, k}}, {}});
      for (int i = k + 1; i <= nb; ++i)
        tasks.push_back({CholTask::Kind::Solve, owner(i, k), Phase::CholFactor, {{i, k}}, {{k, k}}});
      for (int j = k + 1; j <= c1; ++j)
        for (int i = j; i <= nb; ++i) {
          CholTask t{CholTask::Kind::Update, owner(i, j), Phase::CholPanel, {{i, j}}, {}};
          add_input(t.inputs, {i, k});
          add_input(t.inputs, {j, k});
          tasks.push_back(std::move(t));
        }
    }
    for (int bm = big + 1; bm <= h; ++bm)
      for (int bl = bm; bl <= h; ++bl)
        for (int c = 1; c <= d; ++c) {
          const int k = c0 + c - 1;
          std::map<int, CholTask> by_owner;
          for (int s = 1; s <= d; ++s)
            for (int r = 1; r <= d; ++r) {
              int i = (bl - 1) * d + r, j = (bm - 1) * d + s;
              if (i < j) continue;
              int o = owner(i, j);
              auto [it, fresh] = by_owner.try_emplace(
                  o, CholTask{CholTask::Kind::Update, o, Phase::CholTrailing, {}, {}});
              it->second.targets.push_back({i, j});
              add_input(it->second.inputs, {i, k});
              add_input(it->second.inputs, {j, k});
            }
          for (auto& [o, t] : by_owner) tasks.push_back(std::move(t));
        }
  }
  return tasks;
}

json kernel_chol(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  const std::string in = args.at("input").get<std::string>();
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& src = distributed(w, in);
  if (src.layout->kind() != ObjectKind::Triangular)
    raise(ErrorKind::DimensionMismatch, "Cholesky needs a triangular object");
  const DistLayout layout = *src.layout;
  std::map<BlockIndex, Block> work = src.blocks;
  w.reset_residency(static_cast<long>(work.size()));

  const std::vector<CholTask> tasks = chol_plan(layout, w.grid());
  std::map<BlockIndex, std::vector<std::size_t>> consumers;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    for (BlockIndex b : tasks[t].inputs) consumers[b].push_back(t);

  const Index bs = layout.block_rows();
  const int me = w.rank();
  auto publish = [&](BlockIndex b) {
    auto it = consumers.find(b);
    if (it == consumers.end()) return;
    for (std::size_t t : it->second)
      if (tasks[t].owner != me) w.send_block(tasks[t].owner, tasks[t].phase, out, b, work.at(b));
  };

  for (const CholTask& task : tasks) {
    if (task.owner != me) continue;
    std::map<BlockIndex, Block> received;
    for (BlockIndex b : task.inputs) {
      int src_rank = w.rank_of(block_owner(b, w.grid()));
      if (src_rank == me) continue;
      received.emplace(b, w.recv_block(src_rank, task.phase, out, b, bs, bs));
      w.acquire_block();
    }
    auto input = [&](BlockIndex b) -> const Block& {
      auto it = received.find(b);
      return it != received.end() ? it->second : work.at(b);
    };

    switch (task.kind) {
      case CholTask::Kind::Factor: {
        BlockIndex b = task.targets.front();
        Block& a = work.at(b);
        Eigen::LLT<Block, Eigen::Lower> llt(a);
        if (llt.info() != Eigen::Success)
          throw Error(ErrorKind::NotPositiveDefinite,
                      "matrix is not positive definite at diagonal block " + std::to_string(b.row),
                      std::nullopt, b.row);
        a = llt.matrixL();
        w.log("potrf", b.row, b.col);
        publish(b);
        break;
      }
      case CholTask::Kind::Solve: {
        BlockIndex b = task.targets.front();
        const Block& l = input(task.inputs.front());
        l.triangularView<Eigen::Lower>().transpose().solveInPlace<Eigen::OnTheRight>(work.at(b));
        w.log("trsm", b.row, b.col);
        publish(b);
        break;
      }
      case CholTask::Kind::Update: {
        const int k = task.inputs.front().col;
        for (BlockIndex b : task.targets) {
          Block& a = work.at(b);
          const Block& li = input({b.row, k});
          if (b.row == b.col) {
            a.selfadjointView<Eigen::Lower>().rankUpdate(li, -1.0);
            w.log("syrk", b.row, b.col);
          } else {
            a.noalias() -= li * input({b.col, k}).transpose();
            w.log("gemm", b.row, b.col);
          }
        }
        break;
      }
    }
    for (std::size_t r = 0; r < received.size(); ++r) w.release_block();
  }

  LocalObject result;
  result.layout = layout;
  for (auto& [b, blk] : work) {
    if (b.row == b.col) blk.triangularView<Eigen::StrictlyUpper>().setZero();
    result.blocks.emplace(b, std::move(blk));
  }
  const long owned = static_cast<long>(result.blocks.size());
  w.store().put(out, std::move(result));
  return {{"owned", owned}, {"peak", w.peak_residency()}};
}

// ------------------------------------------------------- triangular solves

struct SolveContext {
  Worker& w;
  const std::string& out;
  const LocalObject& l;
  const DistLayout& rhs_layout;
  std::map<BlockIndex, Block>& x;  // owned rhs blocks, updated in place
  int nb;
  int ncb;

  int l_owner(int i, int j) const { return w.rank_of(block_owner({i, j}, w.grid())); }
  int rhs_owner(int i, int j) const { return owner_rank(w, rhs_layout, {i, j}); }
};

// Diagonal factor block k for every rhs owner in block row k.
void share_diagonal(SolveContext& s, int k, std::map<int, Block>& diag_cache) {
  const int me = s.w.rank();
  if (s.l_owner(k, k) == me) {
    std::set<int> sent;
    for (int jb = 1; jb <= s.ncb; ++jb) {
      int o = s.rhs_owner(k, jb);
      if (o != me && sent.insert(o).second)
        s.w.send_block(o, Phase::Data, s.out, {k, k}, s.l.blocks.at({k, k}));
    }
  }
  bool need = false;
  for (int jb = 1; jb <= s.ncb; ++jb) need = need || s.rhs_owner(k, jb) == me;
  if (need && s.l_owner(k, k) != me) {
    Index bs = s.l.layout->block_rows();
    diag_cache[k] = s.w.recv_block(s.l_owner(k, k), Phase::Data, s.out, {k, k}, bs, bs);
  }
}

const Block& diagonal_block(SolveContext& s, int k, std::map<int, Block>& diag_cache) {
  auto it = diag_cache.find(k);
  return it != diag_cache.end() ? it->second : s.l.blocks.at({k, k});
}

// A solved rhs block (k, jb), fetched once per step by each L owner that uses it.
const Block& solved_block(SolveContext& s, int k, int jb, std::map<BlockIndex, Block>& cache) {
  if (s.rhs_owner(k, jb) == s.w.rank()) return s.x.at({k, jb});
  auto it = cache.find({k, jb});
  if (it != cache.end()) return it->second;
  Block b = s.w.recv_block(s.rhs_owner(k, jb), Phase::SolveRhs, s.out, {k, jb},
                           s.rhs_layout.block_rows(), s.rhs_layout.block_cols());
  return cache.emplace(BlockIndex{k, jb}, std::move(b)).first->second;
}

void send_solved(SolveContext& s, int k, int jb, const std::vector<int>& l_owners) {
  const int me = s.w.rank();
  std::set<int> sent;
  for (int o : l_owners)
    if (o != me && sent.insert(o).second)
      s.w.send_block(o, Phase::SolveRhs, s.out, {k, jb}, s.x.at({k, jb}));
}

// Partial product destined for rhs block (i, jb); kept locally when owned.
void deliver_partial(SolveContext& s, int i, int jb, int from, Block p,
                     std::map<std::tuple<int, int, int>, Block>& local) {
  int dst = s.rhs_owner(i, jb);
  if (dst == s.w.rank())
    local.emplace(std::make_tuple(i, jb, from), std::move(p));
  else
    s.w.send_block(dst, Phase::SolvePartial, s.out, {i, jb}, p);
}

Block take_partial(SolveContext& s, int i, int jb, int from, int src,
                   std::map<std::tuple<int, int, int>, Block>& local) {
  if (src == s.w.rank()) {
    auto node = local.extract(std::make_tuple(i, jb, from));
    return std::move(node.mapped());
  }
  return s.w.recv_block(src, Phase::SolvePartial, s.out, {i, jb}, s.rhs_layout.block_rows(),
                        s.rhs_layout.block_cols());
}

void forward_solve(SolveContext& s) {
  const int me = s.w.rank();
  std::map<std::tuple<int, int, int>, Block> local;
  for (int k = 1; k <= s.nb; ++k) {
    std::map<int, Block> diag_cache;
    std::map<BlockIndex, Block> rhs_cache;
    share_diagonal(s, k, diag_cache);
    std::vector<int> l_owners;
    for (int i = k + 1; i <= s.nb; ++i) l_owners.push_back(s.l_owner(i, k));
    for (int jb = 1; jb <= s.ncb; ++jb) {
      if (s.rhs_owner(k, jb) != me) continue;
      Block& b = s.x.at({k, jb});
      for (int j = 1; j < k; ++j) b -= take_partial(s, k, jb, j, s.l_owner(k, j), local);
      const Block& lkk = diagonal_block(s, k, diag_cache);
      check_diagonal(lkk, k);
      lkk.triangularView<Eigen::Lower>().solveInPlace(b);
      s.w.log("trsv", k, jb);
      send_solved(s, k, jb, l_owners);
    }
    for (int i = k + 1; i <= s.nb; ++i) {
      if (s.l_owner(i, k) != me) continue;
      for (int jb = 1; jb <= s.ncb; ++jb) {
        Block p = s.l.blocks.at({i, k}) * solved_block(s, k, jb, rhs_cache);
        s.w.log("gemv", i, k);
        deliver_partial(s, i, jb, k, std::move(p), local);
      }
    }
  }
}

void back_solve(SolveContext& s) {
  const int me = s.w.rank();
  std::map<std::tuple<int, int, int>, Block> local;
  for (int k = s.nb; k >= 1; --k) {
    std::map<int, Block> diag_cache;
    std::map<BlockIndex, Block> rhs_cache;
    share_diagonal(s, k, diag_cache);
    std::vector<int> l_owners;
    for (int j = 1; j < k; ++j) l_owners.push_back(s.l_owner(k, j));
    for (int jb = 1; jb <= s.ncb; ++jb) {
      if (s.rhs_owner(k, jb) != me) continue;
      Block& b = s.x.at({k, jb});
      for (int i = s.nb; i > k; --i) b -= take_partial(s, k, jb, i, s.l_owner(i, k), local);
      const Block& lkk = diagonal_block(s, k, diag_cache);
      check_diagonal(lkk, k);
      lkk.triangularView<Eigen::Lower>().transpose().solveInPlace(b);
      s.w.log("trsv", k, jb);
      send_solved(s, k, jb, l_owners);
    }
    for (int j = k - 1; j >= 1; --j) {
      if (s.l_owner(k, j) != me) continue;
      for (int jb = 1; jb <= s.ncb; ++jb) {
        Block p = s.l.blocks.at({k, j}).transpose() * solved_block(s, k, jb, rhs_cache);
        s.w.log("gemv", k, j);
        deliver_partial(s, j, jb, k, std::move(p), local);
      }
    }
  }
}

const LocalObject& factor_operand(Worker& w, const std::string& name) {
  const LocalObject& l = distributed(w, name);
  if (l.layout->kind() != ObjectKind::Triangular)
    raise(ErrorKind::DimensionMismatch, "'" + name + "' is not triangular");
  return l;
}

const LocalObject& rhs_operand(Worker& w, const std::string& name, const LocalObject& l) {
  const LocalObject& rhs = distributed(w, name);
  if (rhs.layout->kind() == ObjectKind::Triangular)
    raise(ErrorKind::DimensionMismatch, "right-hand side must be a vector or rectangular matrix");
  if (!(rhs.layout->rows() == l.layout->rows()))
    raise(ErrorKind::DimensionMismatch, "right-hand side rows do not match the factor layout");
  return rhs;
}

json kernel_solve(Worker& w, const json& args, const std::vector<double>&, std::vector<double>&) {
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& l = factor_operand(w, args.at("factor").get<std::string>());
  const LocalObject& rhs = rhs_operand(w, args.at("rhs").get<std::string>(), l);
  const DistLayout rhs_layout = *rhs.layout;
  std::map<BlockIndex, Block> x = rhs.blocks;
  SolveContext s{w, out, l, rhs_layout, x, l.layout->row_blocks(), rhs_layout.col_blocks()};
  if (args.at("side").get<std::string>() == "forward")
    forward_solve(s);
  else
    back_solve(s);
  LocalObject result;
  result.layout = rhs_layout;
  result.blocks = std::move(x);
  w.store().put(out, std::move(result));
  return {};
}

// y = L x: every L owner multiplies the x blocks of its block column; rhs
// owners sum the partials in ascending column order.
json kernel_mult_chol(Worker& w, const json& args, const std::vector<double>&,
                      std::vector<double>&) {
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& l = factor_operand(w, args.at("factor").get<std::string>());
  const LocalObject& rhs = rhs_operand(w, args.at("rhs").get<std::string>(), l);
  const DistLayout rhs_layout = *rhs.layout;
  std::map<BlockIndex, Block> x = rhs.blocks;
  SolveContext s{w, out, l, rhs_layout, x, l.layout->row_blocks(), rhs_layout.col_blocks()};
  const int me = w.rank();

  for (int k = 1; k <= s.nb; ++k) {
    std::vector<int> l_owners;
    for (int i = k; i <= s.nb; ++i) l_owners.push_back(s.l_owner(i, k));
    for (int jb = 1; jb <= s.ncb; ++jb)
      if (s.rhs_owner(k, jb) == me) send_solved(s, k, jb, l_owners);
  }
  std::map<std::tuple<int, int, int>, Block> local;
  for (int k = 1; k <= s.nb; ++k) {
    std::map<BlockIndex, Block> rhs_cache;
    for (int i = k; i <= s.nb; ++i) {
      if (s.l_owner(i, k) != me) continue;
      for (int jb = 1; jb <= s.ncb; ++jb) {
        const Block& xk = solved_block(s, k, jb, rhs_cache);
        Block p = i == k ? Block(l.blocks.at({i, k}).triangularView<Eigen::Lower>() * xk)
                         : Block(l.blocks.at({i, k}) * xk);
        w.log("gemv", i, k);
        deliver_partial(s, i, jb, k, std::move(p), local);
      }
    }
  }
  LocalObject result;
  result.layout = rhs_layout;
  for (int i = 1; i <= s.nb; ++i)
    for (int jb = 1; jb <= s.ncb; ++jb) {
      if (s.rhs_owner(i, jb) != me) continue;
      Block y = take_partial(s, i, jb, 1, s.l_owner(i, 1), local);
      for (int k = 2; k <= i; ++k) y += take_partial(s, i, jb, k, s.l_owner(i, k), local);
      reset_padding(y, {i, jb}, rhs_layout);
      result.blocks.emplace(BlockIndex{i, jb}, std::move(y));
    }
  w.store().put(out, std::move(result));
  return {};
}

// ------------------------------------------------------------ crossproducts

const LocalObject& rect_operand(Worker& w, const std::string& name) {
  const LocalObject& v = distributed(w, name);
  if (v.layout->kind() != ObjectKind::Rectangular)
    raise(ErrorKind::DimensionMismatch, "'" + name + "' is not rectangular");
  return v;
}

// out_J = sum_I V_IJ^T u_I, summed in ascending I on the diagonal owner of J.
json kernel_crossprod_vec(Worker& w, const json& args, const std::vector<double>&,
                          std::vector<double>&) {
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& v = rect_operand(w, args.at("matrix").get<std::string>());
  const LocalObject& u = distributed(w, args.at("vector").get<std::string>());
  const DistLayout& vl = *v.layout;
  if (u.layout->kind() != ObjectKind::Vector || !(u.layout->rows() == vl.rows()))
    raise(ErrorKind::DimensionMismatch, "vector does not conform with the matrix rows");
  const DistLayout ol = DistLayout::vector(vl.cols());
  const int me = w.rank();
  const int nrb = vl.row_blocks(), ncb = vl.col_blocks();
  auto v_owner = [&](int i, int j) { return owner_rank(w, vl, {i, j}); };
  auto diag_owner = [&](int i) { return w.rank_of(vector_block_owner(i, w.grid())); };

  for (int i = 1; i <= nrb; ++i) {
    if (diag_owner(i) != me) continue;
    std::set<int> sent;
    for (int j = 1; j <= ncb; ++j) {
      int o = v_owner(i, j);
      if (o != me && sent.insert(o).second) w.send_block(o, Phase::Product, out, {i, 1}, u.blocks.at({i, 1}));
    }
  }
  std::map<std::pair<int, int>, Block> local;
  for (int i = 1; i <= nrb; ++i) {
    std::optional<Block> ui;
    for (int j = 1; j <= ncb; ++j) {
      if (v_owner(i, j) != me) continue;
      if (!ui)
        ui = diag_owner(i) == me ? u.blocks.at({i, 1})
                                 : w.recv_block(diag_owner(i), Phase::Product, out, {i, 1},
                                                vl.block_rows(), 1);
      Block p = v.blocks.at({i, j}).transpose() * *ui;
      w.log("gemv", i, j);
      if (diag_owner(j) == me)
        local.emplace(std::make_pair(j, i), std::move(p));
      else
        w.send_block(diag_owner(j), Phase::ProductPartial, out, {j, 1}, p);
    }
  }
  LocalObject result;
  result.layout = ol;
  for (int j = 1; j <= ncb; ++j) {
    if (diag_owner(j) != me) continue;
    Block acc = Block::Zero(ol.block_rows(), 1);
    for (int i = 1; i <= nrb; ++i) {
      int src = v_owner(i, j);
      if (src == me)
        acc += local.at({j, i});
      else
        acc += w.recv_block(src, Phase::ProductPartial, out, {j, 1}, ol.block_rows(), 1);
    }
    reset_padding(acc, {j, 1}, ol);
    result.blocks.emplace(BlockIndex{j, 1}, std::move(acc));
  }
  w.store().put(out, std::move(result));
  return {};
}

// out_JK = sum_I V_IJ^T V_IK for J >= K; each output owner streams the two
// V blocks of one row block at a time.
json kernel_crossprod_self(Worker& w, const json& args, const std::vector<double>&,
                           std::vector<double>&) {
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& v = rect_operand(w, args.at("matrix").get<std::string>());
  const DistLayout& vl = *v.layout;
  const DistLayout ol = DistLayout::triangular(vl.cols());
  const int me = w.rank();
  const int nrb = vl.row_blocks(), ncb = vl.col_blocks();
  auto v_owner = [&](int i, int j) { return owner_rank(w, vl, {i, j}); };
  auto o_owner = [&](int j, int k) { return owner_rank(w, ol, {j, k}); };

  // Consumer order: output tasks (J, K) column-major, then row block I.
  for (int i = 1; i <= nrb; ++i)
    for (int j = 1; j <= ncb; ++j) {
      if (v_owner(i, j) != me) continue;
      for (int kc = 1; kc <= ncb; ++kc)
        for (int jr = kc; jr <= ncb; ++jr) {
          if (jr != j && kc != j) continue;
          int o = o_owner(jr, kc);
          if (o != me) w.send_block(o, Phase::Product, out, {i, j}, v.blocks.at({i, j}));
        }
    }
  LocalObject result;
  result.layout = ol;
  auto fetch = [&](int i, int j) -> Block {
    int src = v_owner(i, j);
    if (src == me) return v.blocks.at({i, j});
    return w.recv_block(src, Phase::Product, out, {i, j}, vl.block_rows(), vl.block_cols());
  };
  for (int kc = 1; kc <= ncb; ++kc)
    for (int jr = kc; jr <= ncb; ++jr) {
      if (o_owner(jr, kc) != me) continue;
      Block acc = Block::Zero(ol.block_rows(), ol.block_cols());
      for (int i = 1; i <= nrb; ++i) {
        Block a = fetch(i, jr);
        if (jr == kc) {
          acc.noalias() += a.transpose() * a;
        } else {
          Block b = fetch(i, kc);
          acc.noalias() += a.transpose() * b;
        }
      }
      w.log("crossprod", jr, kc);
      reset_padding(acc, {jr, kc}, ol);
      result.blocks.emplace(BlockIndex{jr, kc}, std::move(acc));
    }
  w.store().put(out, std::move(result));
  return {};
}

json kernel_crossprod_diag(Worker& w, const json& args, const std::vector<double>&,
                           std::vector<double>&) {
  const std::string out = args.at("output").get<std::string>();
  const LocalObject& v = rect_operand(w, args.at("matrix").get<std::string>());
  const DistLayout& vl = *v.layout;
  const DistLayout ol = DistLayout::vector(vl.cols());
  const int me = w.rank();
  const int nrb = vl.row_blocks(), ncb = vl.col_blocks();
  auto v_owner = [&](int i, int j) { return owner_rank(w, vl, {i, j}); };
  auto diag_owner = [&](int j) { return w.rank_of(vector_block_owner(j, w.grid())); };

  std::map<std::pair<int, int>, Block> local;
  for (int i = 1; i <= nrb; ++i)
    for (int j = 1; j <= ncb; ++j) {
      if (v_owner(i, j) != me) continue;
      Block p = v.blocks.at({i, j}).colwise().squaredNorm().transpose();
      if (diag_owner(j) == me)
        local.emplace(std::make_pair(j, i), std::move(p));
      else
        w.send_block(diag_owner(j), Phase::ProductPartial, out, {j, 1}, p);
    }
  LocalObject result;
  result.layout = ol;
  for (int j = 1; j <= ncb; ++j) {
    if (diag_owner(j) != me) continue;
    Block acc = Block::Zero(ol.block_rows(), 1);
    for (int i = 1; i <= nrb; ++i) {
      int src = v_owner(i, j);
      acc += src == me ? local.at({j, i})
                       : w.recv_block(src, Phase::ProductPartial, out, {j, 1}, ol.block_rows(), 1);
    }
    reset_padding(acc, {j, 1}, ol);
    result.blocks.emplace(BlockIndex{j, 1}, std::move(acc));
  }
  w.store().put(out, std::move(result));
  return {};
}

// ------------------------------------------------------------- reductions

json kernel_logdet(Worker& w, const json& args, const std::vector<double>&,
                   std::vector<double>& reply) {
  const LocalObject& l = factor_operand(w, args.at("factor").get<std::string>());
  const BlockLayout& rows = l.layout->rows();
  double sum = 0.0;
  for (const auto& [b, blk] : l.blocks) {
    if (b.row != b.col) continue;
    for (Index t = 0; t < rows.valid_in_block(b.row); ++t) {
      double d = blk(t, t);
      if (!(d > 0.0))
        throw Error(ErrorKind::SingularDiagonal,
                    "non-positive diagonal entry in block " + std::to_string(b.row), std::nullopt,
                    b.row);
      sum += std::log(d);
    }
  }
  reply = {2.0 * sum};
  return {};
}

json kernel_sumsq(Worker& w, const json& args, const std::vector<double>&,
                  std::vector<double>& reply) {
  const LocalObject& v = distributed(w, args.at("name").get<std::string>());
  double sum = 0.0;
  for (const auto& [b, blk] : v.blocks) sum += blk.squaredNorm();
  reply = {sum};
  return {};
}

}  // namespace

void add_linalg_kernels(KernelTable& t) {
  t["construct"] = kernel_construct;
  t["distribute"] = kernel_distribute;
  t["diag"] = kernel_diag;
  t["chol"] = kernel_chol;
  t["solve"] = kernel_solve;
  t["mult_chol"] = kernel_mult_chol;
  t["crossprod_vec"] = kernel_crossprod_vec;
  t["crossprod_self"] = kernel_crossprod_self;
  t["crossprod_diag"] = kernel_crossprod_diag;
  t["logdet"] = kernel_logdet;
  t["sumsq"] = kernel_sumsq;
}

}  // namespace biggp::detail
