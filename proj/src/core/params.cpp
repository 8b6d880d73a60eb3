#include "core/params.hpp"

#include "core/error.hpp"

namespace pvae {

std::size_t ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  require(!find(name).has_value(), ErrorCode::kInvalidArgument,
          "duplicate parameter name " + name);
  require(rows > 0 && cols > 0, ErrorCode::kInvalidArgument, "empty parameter " + name);
  arrays_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
  return arrays_.size() - 1;
}

std::optional<std::size_t> ParamStore::find(std::string_view name) const {
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (arrays_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t ParamStore::index_of(std::string_view name) const {
  auto i = find(name);
  require(i.has_value(), ErrorCode::kInvalidArgument,
          "unknown parameter " + std::string(name));
  return *i;
}

std::vector<std::size_t> ParamStore::section(std::string_view prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (std::string_view(arrays_[i].name).starts_with(prefix)) out.push_back(i);
  }
  return out;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& a : arrays_) n += static_cast<std::size_t>(a.value.size());
  return n;
}

bool ParamStore::all_finite() const {
  for (const auto& a : arrays_) {
    if (!a.value.allFinite()) return false;
  }
  return true;
}

GradStore zero_grads(const ParamStore& store) {
  GradStore g;
  g.reserve(store.size());
  for (const auto& a : store) g.push_back(Eigen::MatrixXd::Zero(a.value.rows(), a.value.cols()));
  return g;
}

void round_to_float(Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  }
}

}  // namespace pvae
