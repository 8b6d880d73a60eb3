#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace pvae {

struct ParamArray {
  std::string name;
  Eigen::MatrixXd value;
};

// Ordered collection of named parameter matrices. Indices are stable once an
// array is added, and insertion order defines serialization order.
class ParamStore {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return arrays_.size(); }
  ParamArray& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray& operator[](std::size_t i) const { return arrays_[i]; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;  // throws when absent

  // Indices of arrays whose name starts with `prefix`.
  std::vector<std::size_t> section(std::string_view prefix) const;

  std::size_t scalar_count() const;
  bool all_finite() const;

  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

 private:
  std::vector<ParamArray> arrays_;
};

using GradStore = std::vector<Eigen::MatrixXd>;

GradStore zero_grads(const ParamStore& store);

// Rounds every entry to the nearest float32 so the store survives a float32
// checkpoint round trip bit-exactly.
void round_to_float(Eigen::MatrixXd& m);

}  // namespace pvae
