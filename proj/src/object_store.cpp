#include "biggp/object_store.hpp"

#include <mutex>

#include "biggp/error.hpp"

namespace biggp {

std::size_t LocalObject::size() const noexcept {
  if (!layout) return values.size();
  std::size_t total = 0;
  for (const auto& [idx, b] : blocks) total += static_cast<std::size_t>(b.size());
  return total;
}

const LocalObject& ObjectStore::get(const std::string& name) const {
  auto it = objects_.find(name);
  if (it == objects_.end()) raise(ErrorKind::NoSuchObject, "no object named '" + name + "'");
  return it->second;
}

LocalObject& ObjectStore::get(const std::string& name) {
  auto it = objects_.find(name);
  if (it == objects_.end()) raise(ErrorKind::NoSuchObject, "no object named '" + name + "'");
  return it->second;
}

std::vector<std::string> ObjectStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, obj] : objects_) out.push_back(name);
  return out;
}

void reset_padding(Block& block, BlockIndex index, const DistLayout& layout) {
  Index valid_rows = layout.rows().valid_in_block(index.row);
  Index valid_cols = layout.kind() == ObjectKind::Vector ? 1 : layout.cols().valid_in_block(index.col);
  Index rows = block.rows(), cols = block.cols();
  if (valid_rows == rows && valid_cols == cols) return;
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      if (i >= valid_rows || j >= valid_cols) block(i, j) = 0.0;
  if (layout.kind() == ObjectKind::Triangular && index.row == index.col)
    for (Index i = valid_rows; i < rows; ++i) block(i, i) = 1.0;
}

namespace {

template <class Fn>
struct Registry {
  std::mutex mu;
  std::map<std::string, Fn> entries;
};

Registry<RemoteFunction>& functions() {
  static Registry<RemoteFunction> r;
  return r;
}

Registry<Generator>& generators() {
  static Registry<Generator> r;
  return r;
}

}  // namespace

void register_function(const std::string& id, RemoteFunction fn) {
  auto& r = functions();
  std::lock_guard lock(r.mu);
  r.entries[id] = std::move(fn);
}

const RemoteFunction& find_function(const std::string& id) {
  auto& r = functions();
  std::lock_guard lock(r.mu);
  auto it = r.entries.find(id);
  if (it == r.entries.end()) raise(ErrorKind::UnknownFunction, "no remote function '" + id + "'");
  return it->second;
}

void register_generator(const std::string& id, Generator fn) {
  auto& r = generators();
  std::lock_guard lock(r.mu);
  r.entries[id] = std::move(fn);
}

const Generator& find_generator(const std::string& id) {
  auto& r = generators();
  std::lock_guard lock(r.mu);
  auto it = r.entries.find(id);
  if (it == r.entries.end()) raise(ErrorKind::UnknownFunction, "no generator '" + id + "'");
  return it->second;
}

bool has_generator(const std::string& id) {
  auto& r = generators();
  std::lock_guard lock(r.mu);
  return r.entries.count(id) != 0;
}

}  // namespace biggp
