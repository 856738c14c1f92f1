#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cmfg {

// Truncated half-line [0, L] with nodes x_i = i*dx, i = 0..nx+1, and a
// uniform time mesh t_k = k*dt, k = 0..nt. Nodes 0 and nx+1 are boundary
// nodes; 1..nx are interior.
struct Grid {
  double L = 1.0;
  int nx = 100;
  double T = 1.0;
  int nt = 100;
  double sigma = 1.0;

  double dx() const { return L / (nx + 1); }
  double dt() const { return T / nt; }
  double x(int i) const { return i * dx(); }
  double t(int k) const { return k * dt(); }
  int nodes() const { return nx + 2; }
  int levels() const { return nt + 1; }

  // Index of the interior node closest to position y (clamped to 1..nx).
  int nearest_node(double y) const;

  // Throws DomainError on non-positive lengths, counts or sigma.
  void validate() const;

  bool same_mesh(const Grid& other) const;
};

// Row-major (time level) x (node) storage for quantities on the full
// space-time mesh.
class Field {
 public:
  Field() = default;
  Field(int levels, int nodes, double value = 0.0)
      : levels_(levels), nodes_(nodes),
        data_(static_cast<std::size_t>(levels) * nodes, value) {}
  explicit Field(const Grid& g, double value = 0.0) : Field(g.levels(), g.nodes(), value) {}

  int levels() const { return levels_; }
  int nodes() const { return nodes_; }

  std::span<double> operator[](int k) {
    return {data_.data() + static_cast<std::size_t>(k) * nodes_, static_cast<std::size_t>(nodes_)};
  }
  std::span<const double> operator[](int k) const {
    return {data_.data() + static_cast<std::size_t>(k) * nodes_, static_cast<std::size_t>(nodes_)};
  }
  double& operator()(int k, int i) { return data_[static_cast<std::size_t>(k) * nodes_ + i]; }
  double operator()(int k, int i) const { return data_[static_cast<std::size_t>(k) * nodes_ + i]; }

  const std::vector<double>& raw() const { return data_; }

  double sup_abs() const;

 private:
  int levels_ = 0;
  int nodes_ = 0;
  std::vector<double> data_;
};

// sup |a - b| over all entries; throws DomainError on shape mismatch.
double sup_distance(const Field& a, const Field& b);

}  // namespace cmfg
