#pragma once
// Sparse per-row gradient accumulator. A batch touches a small subset of
// embedding rows; updates iterate rows in ascending id order so optimizer
// application is deterministic.

#include <algorithm>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

namespace fedkge {

class GradBuffer {
 public:
  explicit GradBuffer(std::size_t width) : width_(width) {}

  std::size_t width() const { return width_; }
  bool empty() const { return rows_.empty(); }
  std::size_t touched() const { return rows_.size(); }

  std::span<double> row(std::int32_t id) {
    auto [it, inserted] = rows_.try_emplace(id);
    if (inserted) it->second.assign(width_, 0.0);
    return {it->second.data(), width_};
  }

  bool has(std::int32_t id) const { return rows_.contains(id); }

  std::vector<std::int32_t> sorted_ids() const {
    std::vector<std::int32_t> ids;
    ids.reserve(rows_.size());
    for (const auto& [id, _] : rows_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
  }

  std::span<const double> row(std::int32_t id) const {
    const auto& v = rows_.at(id);
    return {v.data(), width_};
  }

  void scale(double a) {
    for (auto& [_, v] : rows_)
      for (auto& x : v) x *= a;
  }

 private:
  std::size_t width_;
  std::unordered_map<std::int32_t, std::vector<double>> rows_;
};

}  // namespace fedkge
