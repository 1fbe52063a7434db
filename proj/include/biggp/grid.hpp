#pragma once

/** @file
 *
 * Layout arithmetic for the folded triangular process grid.
 *
 * P = D(D+1)/2 worker processes sit on the lower triangle of a D x D grid,
 * ranked column-major (for D = 4 the diagonal carries ranks 1, 5, 8, 10).
 * A matrix of order n is cut into B = hD blocks per dimension; block (I, J)
 * lives on the process at the folded residue pair of (I, J) modulo D.
 *
 * All indices in this header are 1-based.
 */

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace biggp {

using Index = std::int64_t;

/// Position of a worker on the lower-triangular grid, 1 <= col <= row <= D.
struct Coord {
  int row = 1;
  int col = 1;

  bool diagonal() const noexcept { return row == col; }
  auto operator<=>(const Coord&) const = default;
};

std::string to_string(Coord c);

class ProcessGrid {
 public:
  explicit ProcessGrid(int order);

  /// Grid with D(D+1)/2 == processes. Throws NotTriangularNumber otherwise.
  static ProcessGrid from_process_count(int processes);

  int order() const noexcept { return order_; }
  int size() const noexcept { return order_ * (order_ + 1) / 2; }

  Coord coord(int rank) const;
  int rank(Coord c) const;
  bool valid(Coord c) const noexcept;

  /// Ranks of the D diagonal processes, in grid order.
  std::vector<int> diagonal_ranks() const;

  bool operator==(const ProcessGrid&) const = default;

 private:
  int order_;
};

/// Blocking of one matrix dimension: n entries cut into hD blocks.
class BlockLayout {
 public:
  BlockLayout() = default;
  BlockLayout(Index n, int replication, int grid_order);

  Index size() const noexcept { return n_; }
  int replication() const noexcept { return h_; }
  int grid_order() const noexcept { return d_; }
  int blocks() const noexcept { return h_ * d_; }
  Index block_size() const noexcept { return block_size_; }
  Index padded_size() const noexcept { return block_size_ * blocks(); }

  /// Global index of the first entry of block I.
  Index first(int block) const noexcept { return (block - 1) * block_size_ + 1; }
  int block_of(Index i) const noexcept { return static_cast<int>((i - 1) / block_size_) + 1; }
  /// Number of unpadded entries in block I (may be 0 for trailing blocks).
  Index valid_in_block(int block) const noexcept;

  bool operator==(const BlockLayout&) const = default;

 private:
  Index n_ = 0;
  int h_ = 1;
  int d_ = 1;
  Index block_size_ = 1;
};

/// Smallest h whose block size ceil(n / (hD)) does not exceed target.
int default_replication(Index n, int grid_order, Index target_block_size = 1000);

struct BlockIndex {
  int row = 1;
  int col = 1;
  auto operator<=>(const BlockIndex&) const = default;
};

/// Owner of lower-triangular block (I, J). Throws OutOfTriangle if J > I.
Coord block_owner(BlockIndex b, const ProcessGrid& grid);
/// Owner of rectangular block (I, J); same folding without the triangle restriction.
Coord rect_block_owner(BlockIndex b, const ProcessGrid& grid);
/// Owner of vector block J: the diagonal process at the residue of J.
Coord vector_block_owner(int block, const ProcessGrid& grid);

enum class ObjectKind { Triangular, Rectangular, Vector };

const char* to_string(ObjectKind kind);
ObjectKind object_kind_from_string(const std::string& name);

/// Element coordinates owned by one process, as produced by local_index_sets.
struct ElementIndex {
  Index row;
  Index col;
  bool padded;
};

/**
 * Complete description of how a distributed object is cut and placed.
 *
 * Triangular objects use one layout for both dimensions and store the
 * lower block triangle. Vectors store blocks (I, 1) on diagonal processes.
 */
class DistLayout {
 public:
  DistLayout() = default;
  static DistLayout triangular(BlockLayout layout);
  static DistLayout rectangular(BlockLayout rows, BlockLayout cols);
  static DistLayout vector(BlockLayout layout);

  ObjectKind kind() const noexcept { return kind_; }
  const BlockLayout& rows() const noexcept { return rows_; }
  const BlockLayout& cols() const noexcept { return cols_; }

  Index block_rows() const noexcept { return rows_.block_size(); }
  Index block_cols() const noexcept;
  int row_blocks() const noexcept { return rows_.blocks(); }
  int col_blocks() const noexcept;

  Coord owner(BlockIndex b, const ProcessGrid& grid) const;
  /// Blocks held by c, column-major over the block grid.
  std::vector<BlockIndex> owned_blocks(Coord c, const ProcessGrid& grid) const;
  /// Number of entries c holds, padding included. Diagonal blocks of a
  /// triangular object count their lower triangle only.
  Index local_length(Coord c, const ProcessGrid& grid) const;

  bool operator==(const DistLayout&) const = default;

 private:
  DistLayout(ObjectKind kind, BlockLayout rows, BlockLayout cols)
      : kind_(kind), rows_(rows), cols_(cols) {}

  ObjectKind kind_ = ObjectKind::Vector;
  BlockLayout rows_;
  BlockLayout cols_;
};

/// Element indices stored on c: owned blocks in order, column-major inside
/// each block. Diagonal blocks of a triangular object list only i >= j.
std::vector<ElementIndex> local_index_sets(const DistLayout& layout, Coord c,
                                           const ProcessGrid& grid);

}  // namespace biggp
