#include "biggp/grid.hpp"

#include <cmath>

#include "biggp/error.hpp"

namespace biggp {

std::string to_string(Coord c) {
  return "(" + std::to_string(c.row) + "," + std::to_string(c.col) + ")";
}

ProcessGrid::ProcessGrid(int order) : order_(order) {
  if (order < 1) raise(ErrorKind::InvalidArgument, "grid order must be positive");
}

ProcessGrid ProcessGrid::from_process_count(int processes) {
  if (processes < 1) raise(ErrorKind::NotTriangularNumber, "process count must be positive");
  int d = static_cast<int>(std::lround((std::sqrt(8.0 * processes + 1.0) - 1.0) / 2.0));
  if (d * (d + 1) / 2 != processes)
    raise(ErrorKind::NotTriangularNumber,
          std::to_string(processes) + " is not of the form D(D+1)/2");
  return ProcessGrid(d);
}

// Column-major down the lower triangle: column c starts after the
// (c-1) longer columns to its left, which hold D + (D-1) + ... entries.
int ProcessGrid::rank(Coord c) const {
  if (!valid(c)) raise(ErrorKind::OutOfTriangle, "coordinate " + to_string(c) + " is off the grid");
  int before = (c.col - 1) * order_ - (c.col - 1) * (c.col - 2) / 2;
  return before + (c.row - c.col) + 1;
}

Coord ProcessGrid::coord(int rank) const {
  if (rank < 1 || rank > size())
    raise(ErrorKind::InvalidArgument, "rank " + std::to_string(rank) + " is out of range");
  int remaining = rank - 1;
  for (int col = 1; col <= order_; ++col) {
    int len = order_ - col + 1;
    if (remaining < len) return {col + remaining, col};
    remaining -= len;
  }
  raise(ErrorKind::Internal, "rank lookup fell off the grid");
}

bool ProcessGrid::valid(Coord c) const noexcept {
  return c.col >= 1 && c.col <= c.row && c.row <= order_;
}

std::vector<int> ProcessGrid::diagonal_ranks() const {
  std::vector<int> out;
  for (int i = 1; i <= order_; ++i) out.push_back(rank({i, i}));
  return out;
}

BlockLayout::BlockLayout(Index n, int replication, int grid_order)
    : n_(n), h_(replication), d_(grid_order) {
  if (n < 1) raise(ErrorKind::InvalidArgument, "dimension must be positive");
  if (replication < 1 || grid_order < 1)
    raise(ErrorKind::InvalidArgument, "replication and grid order must be positive");
  Index b = static_cast<Index>(h_) * d_;
  block_size_ = (n_ + b - 1) / b;
}

Index BlockLayout::valid_in_block(int block) const noexcept {
  Index lo = first(block);
  if (lo > n_) return 0;
  Index hi = lo + block_size_ - 1;
  return (hi <= n_ ? hi : n_) - lo + 1;
}

int default_replication(Index n, int grid_order, Index target_block_size) {
  int h = 1;
  while ((n + static_cast<Index>(h) * grid_order - 1) / (static_cast<Index>(h) * grid_order) >
         target_block_size)
    ++h;
  return h;
}

namespace {

Coord fold(BlockIndex b, int d) {
  int a = (b.row - 1) % d + 1;
  int c = (b.col - 1) % d + 1;
  return a >= c ? Coord{a, c} : Coord{c, a};
}

}  // namespace

Coord block_owner(BlockIndex b, const ProcessGrid& grid) {
  if (b.col > b.row || b.col < 1)
    raise(ErrorKind::OutOfTriangle, "block (" + std::to_string(b.row) + "," +
                                        std::to_string(b.col) + ") is above the diagonal");
  return fold(b, grid.order());
}

Coord rect_block_owner(BlockIndex b, const ProcessGrid& grid) { return fold(b, grid.order()); }

Coord vector_block_owner(int block, const ProcessGrid& grid) {
  int c = (block - 1) % grid.order() + 1;
  return {c, c};
}

const char* to_string(ObjectKind kind) {
  switch (kind) {
    case ObjectKind::Triangular: return "triangular";
    case ObjectKind::Rectangular: return "rectangular";
    case ObjectKind::Vector: return "vector";
  }
  return "vector";
}

ObjectKind object_kind_from_string(const std::string& name) {
  if (name == "triangular") return ObjectKind::Triangular;
  if (name == "rectangular") return ObjectKind::Rectangular;
  if (name == "vector") return ObjectKind::Vector;
  raise(ErrorKind::InvalidArgument, "unknown object kind '" + name + "'");
}

DistLayout DistLayout::triangular(BlockLayout layout) {
  return {ObjectKind::Triangular, layout, layout};
}

DistLayout DistLayout::rectangular(BlockLayout rows, BlockLayout cols) {
  if (rows.grid_order() != cols.grid_order())
    raise(ErrorKind::DimensionMismatch, "row and column layouts use different grids");
  return {ObjectKind::Rectangular, rows, cols};
}

DistLayout DistLayout::vector(BlockLayout layout) {
  return {ObjectKind::Vector, layout, BlockLayout(1, 1, layout.grid_order())};
}

Index DistLayout::block_cols() const noexcept {
  return kind_ == ObjectKind::Vector ? 1 : cols_.block_size();
}

int DistLayout::col_blocks() const noexcept {
  return kind_ == ObjectKind::Vector ? 1 : cols_.blocks();
}

Coord DistLayout::owner(BlockIndex b, const ProcessGrid& grid) const {
  switch (kind_) {
    case ObjectKind::Triangular: return block_owner(b, grid);
    case ObjectKind::Rectangular: return rect_block_owner(b, grid);
    case ObjectKind::Vector: return vector_block_owner(b.row, grid);
  }
  return {};
}

std::vector<BlockIndex> DistLayout::owned_blocks(Coord c, const ProcessGrid& grid) const {
  std::vector<BlockIndex> out;
  int d = grid.order();
  switch (kind_) {
    case ObjectKind::Vector:
      if (c.diagonal())
        for (int i = c.row; i <= rows_.blocks(); i += d) out.push_back({i, 1});
      break;
    case ObjectKind::Triangular:
    case ObjectKind::Rectangular:
      // Only rows with residue c.row or c.col can fold onto c.
      for (int j = 1; j <= col_blocks(); ++j) {
        int i0 = kind_ == ObjectKind::Triangular ? j : 1;
        for (int i = i0; i <= rows_.blocks(); ++i) {
          BlockIndex b{i, j};
          if (fold(b, d) == c) out.push_back(b);
        }
      }
      break;
  }
  return out;
}

Index DistLayout::local_length(Coord c, const ProcessGrid& grid) const {
  Index total = 0;
  Index bs = block_rows();
  for (BlockIndex b : owned_blocks(c, grid))
    total += kind_ == ObjectKind::Triangular && b.row == b.col ? bs * (bs + 1) / 2
                                                                : bs * block_cols();
  return total;
}

std::vector<ElementIndex> local_index_sets(const DistLayout& layout, Coord c,
                                           const ProcessGrid& grid) {
  if (!grid.valid(c)) raise(ErrorKind::OutOfTriangle, "coordinate " + to_string(c) + " is off the grid");
  std::vector<ElementIndex> out;
  out.reserve(static_cast<std::size_t>(layout.local_length(c, grid)));
  for (BlockIndex b : layout.owned_blocks(c, grid)) {
    Index r0 = layout.rows().first(b.row);
    Index c0 = layout.kind() == ObjectKind::Vector ? 1 : layout.cols().first(b.col);
    Index ncols = layout.kind() == ObjectKind::Vector ? 1 : layout.cols().size();
    bool lower_only = layout.kind() == ObjectKind::Triangular && b.row == b.col;
    for (Index jj = 0; jj < layout.block_cols(); ++jj)
      for (Index ii = lower_only ? jj : 0; ii < layout.block_rows(); ++ii) {
        Index i = r0 + ii, j = c0 + jj;
        out.push_back({i, j, i > layout.rows().size() || j > ncols});
      }
  }
  return out;
}

}  // namespace biggp
