#pragma once

#include <Eigen/Dense>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "biggp/grid.hpp"

namespace biggp {

using Block = Eigen::MatrixXd;

/**
 * A worker's piece of a named object.
 *
 * Replicated values (pushed from the master) have no layout and keep their
 * data in `values`. Distributed objects keep one dense column-major block
 * per owned block index. Diagonal blocks of triangular objects are square;
 * only their lower triangle is meaningful.
 */
struct LocalObject {
  std::optional<DistLayout> layout;
  std::vector<double> values;
  std::map<BlockIndex, Block> blocks;

  bool distributed() const noexcept { return layout.has_value(); }
  /// Entries held: replicated length, or the sum of block sizes.
  std::size_t size() const noexcept;
};

class ObjectStore {
 public:
  bool contains(const std::string& name) const { return objects_.count(name) != 0; }
  /// Throws NoSuchObject.
  const LocalObject& get(const std::string& name) const;
  LocalObject& get(const std::string& name);
  void put(const std::string& name, LocalObject obj) { objects_[name] = std::move(obj); }
  void erase(const std::string& name) { objects_.erase(name); }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, LocalObject> objects_;
};

/// Sets padded entries of an owned block: identity pattern for triangular
/// objects, zeros otherwise.
void reset_padding(Block& block, BlockIndex index, const DistLayout& layout);

/// Worker identity handed to user functions.
struct WorkerInfo {
  int rank;
  Coord coord;
  const ProcessGrid* grid;
};

/**
 * Function applied by remote_apply to each worker's local pieces.
 * `second` is null for one-input calls. The result's layout, if any, must
 * match the distributed input's.
 */
using RemoteFunction =
    std::function<LocalObject(const LocalObject& first, const LocalObject* second, const WorkerInfo&)>;

/// Named replicated inputs visible to a generator (pushed objects).
using GeneratorInputs = std::map<std::string, std::span<const double>>;

/**
 * Entrywise generator used to construct distributed objects: fills out[k]
 * with the value at global index idx[k] (1-based), given parameters theta.
 * Padded indices are never passed.
 */
using Generator = std::function<void(std::span<const double> theta, const GeneratorInputs& inputs,
                                     std::span<const ElementIndex> idx, std::span<double> out)>;

/// Process-wide registries. Socket workers see only what their executable
/// registers, so custom entries must be registered in the worker binary too.
void register_function(const std::string& id, RemoteFunction fn);
const RemoteFunction& find_function(const std::string& id);
void register_generator(const std::string& id, Generator fn);
const Generator& find_generator(const std::string& id);
bool has_generator(const std::string& id);

}  // namespace biggp
