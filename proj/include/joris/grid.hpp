#pragma once

// Uniform rectangular grids in the plane and complex samples on them.

#include "joris/errors.hpp"
#include "joris/geometry.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace joris {

/// Cell centers origin + (i h, j h), 0 <= i < nx, 0 <= j < ny; row-major in j.
struct Grid {
  Complex origin{0, 0};
  double h = 1;
  std::int64_t nx = 0, ny = 0;

  std::size_t size() const { return static_cast<std::size_t>(nx * ny); }
  std::size_t index(std::int64_t i, std::int64_t j) const { return static_cast<std::size_t>(j * nx + i); }
  Complex point(std::int64_t i, std::int64_t j) const {
    return origin + Complex(static_cast<double>(i) * h, static_cast<double>(j) * h);
  }
  double cell_area() const { return h * h; }
  bool operator==(const Grid& o) const { return origin == o.origin && h == o.h && nx == o.nx && ny == o.ny; }
};

/// Cap on cells per grid; keeps the padded transform within a few hundred MB.
inline constexpr std::int64_t kMaxGridCells = std::int64_t{1} << 19;

/// Grid centered at 0 with odd nx, ny (so x = 0 and y = 0 are grid lines),
/// covering [-X, X] x [-Y, Y] with at least `margin` extra cells each side.
inline Grid make_centered_grid(double X, double Y, double h, std::int64_t margin = 4) {
  if (!(h > 0) || !(X > 0) || !(Y > 0)) throw DomainError("grid: need positive extents and spacing");
  std::int64_t hx = static_cast<std::int64_t>(std::ceil(X / h)) + margin;
  std::int64_t hy = static_cast<std::int64_t>(std::ceil(Y / h)) + margin;
  Grid g;
  g.h = h;
  g.nx = 2 * hx + 1;
  g.ny = 2 * hy + 1;
  g.origin = Complex(-static_cast<double>(hx) * h, -static_cast<double>(hy) * h);
  return g;
}

/// Spacing used for Omega_eps: min(eps^2/64, 1/256), coarsened when the
/// bounding box would need more than kMaxGridCells cells.
inline double grid_spacing_for(double eps, std::int64_t max_cells = kMaxGridCells) {
  if (!(eps > 0)) throw DomainError("grid spacing: eps must be > 0");
  double h = std::min(eps * eps / 64, 1.0 / 256);
  while (static_cast<std::int64_t>(make_centered_grid(std::cosh(eps), std::sinh(eps), h).size()) > max_cells) h *= 1.01;
  return h;
}

inline Grid grid_for(double eps, std::int64_t max_cells = kMaxGridCells) {
  double h = grid_spacing_for(eps, max_cells);
  return make_centered_grid(std::cosh(eps), std::sinh(eps), h);
}

class GridFunction {
 public:
  GridFunction() = default;
  GridFunction(Grid grid, std::string support = "")
      : grid_(grid), data_(grid.size(), Complex(0, 0)), support_(std::move(support)) {}
  GridFunction(Grid grid, std::vector<Complex> data, std::string support = "")
      : grid_(grid), data_(std::move(data)), support_(std::move(support)) {
    if (data_.size() != grid_.size()) throw DataError("grid function: sample count does not match grid");
  }

  /// Samples fn at cell centers; cells where `mask` is false are set to zero.
  static GridFunction sample(const Grid& grid, const std::function<Complex(Complex)>& fn,
                             const std::function<bool(Complex)>& mask = nullptr, std::string support = "") {
    GridFunction out(grid, std::move(support));
    for (std::int64_t j = 0; j < grid.ny; ++j)
      for (std::int64_t i = 0; i < grid.nx; ++i) {
        Complex z = grid.point(i, j);
        if (!mask || mask(z)) out.data_[grid.index(i, j)] = fn(z);
      }
    return out;
  }

  const Grid& grid() const { return grid_; }
  const std::string& support() const { return support_; }
  void set_support(std::string s) { support_ = std::move(s); }
  std::vector<Complex>& data() { return data_; }
  const std::vector<Complex>& data() const { return data_; }
  Complex& at(std::int64_t i, std::int64_t j) { return data_[grid_.index(i, j)]; }
  Complex at(std::int64_t i, std::int64_t j) const { return data_[grid_.index(i, j)]; }

  double sup_norm() const {
    double m = 0;
    for (auto v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  /// Cell-area-weighted L^2 norm.
  double l2_norm() const {
    double s = 0;
    for (auto v : data_) s += std::norm(v);
    return std::sqrt(s * grid_.cell_area());
  }

  bool is_zero() const {
    return std::all_of(data_.begin(), data_.end(), [](Complex v) { return v == Complex(0, 0); });
  }

  GridFunction& operator+=(const GridFunction& o) {
    require_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += o.data_[k];
    return *this;
  }
  GridFunction& operator-=(const GridFunction& o) {
    require_same(o);
    for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= o.data_[k];
    return *this;
  }
  GridFunction& operator*=(Complex a) {
    for (auto& v : data_) v *= a;
    return *this;
  }
  friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
  friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
  friend GridFunction operator*(Complex s, GridFunction a) { return a *= s; }

 private:
  void require_same(const GridFunction& o) const {
    if (!(grid_ == o.grid_)) throw PreconditionError("grid functions live on different grids");
  }

  Grid grid_;
  std::vector<Complex> data_;
  std::string support_;
};

// ---------------------------------------------------------------------------
// Finite differences (fourth order, interior cells i, j in [2, n-3])

inline bool has_stencil(const Grid& g, std::int64_t i, std::int64_t j) {
  return i >= 2 && j >= 2 && i + 2 < g.nx && j + 2 < g.ny;
}

inline Complex diff_x(const GridFunction& f, std::int64_t i, std::int64_t j) {
  return (-f.at(i + 2, j) + 8.0 * f.at(i + 1, j) - 8.0 * f.at(i - 1, j) + f.at(i - 2, j)) / (12 * f.grid().h);
}

inline Complex diff_y(const GridFunction& f, std::int64_t i, std::int64_t j) {
  return (-f.at(i, j + 2) + 8.0 * f.at(i, j + 1) - 8.0 * f.at(i, j - 1) + f.at(i, j - 2)) / (12 * f.grid().h);
}

/// d/dz-bar = (d/dx + i d/dy) / 2.
inline Complex diff_dbar(const GridFunction& f, std::int64_t i, std::int64_t j) {
  return 0.5 * (diff_x(f, i, j) + Complex(0, 1) * diff_y(f, i, j));
}

/// d/dz = (d/dx - i d/dy) / 2.
inline Complex diff_dz(const GridFunction& f, std::int64_t i, std::int64_t j) {
  return 0.5 * (diff_x(f, i, j) - Complex(0, 1) * diff_y(f, i, j));
}

// ---------------------------------------------------------------------------
// Serialization

/// Writes bytes to `path` through a temporary file and a rename.
inline void write_file_atomic(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw DataError("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw DataError("cannot rename '" + tmp.string() + "' to '" + path + "': " + ec.message());
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("grid file truncated");
  unsigned char b[sizeof(T)];
  std::memcpy(b, in.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

/// Little-endian layout: origin re, origin im, h (double); nx, ny (int64);
/// then nx*ny interleaved re/im doubles, row-major.
inline std::string to_binary(const GridFunction& f) {
  std::string out;
  const auto& g = f.grid();
  out.reserve(40 + 16 * g.size());
  detail::put_le(out, g.origin.real());
  detail::put_le(out, g.origin.imag());
  detail::put_le(out, g.h);
  detail::put_le(out, g.nx);
  detail::put_le(out, g.ny);
  for (auto v : f.data()) {
    detail::put_le(out, v.real());
    detail::put_le(out, v.imag());
  }
  return out;
}

inline GridFunction from_binary(const std::string& bytes) {
  std::size_t pos = 0;
  Grid g;
  double ore = detail::get_le<double>(bytes, pos), oim = detail::get_le<double>(bytes, pos);
  g.origin = Complex(ore, oim);
  g.h = detail::get_le<double>(bytes, pos);
  g.nx = detail::get_le<std::int64_t>(bytes, pos);
  g.ny = detail::get_le<std::int64_t>(bytes, pos);
  if (!(g.h > 0) || g.nx <= 0 || g.ny <= 0 || g.nx > (1 << 24) || g.ny > (1 << 24))
    throw DataError("grid file: bad header");
  if (bytes.size() != pos + 16 * g.size()) throw DataError("grid file: payload size does not match header");
  std::vector<Complex> data(g.size());
  for (auto& v : data) {
    double re = detail::get_le<double>(bytes, pos), im = detail::get_le<double>(bytes, pos);
    v = Complex(re, im);
  }
  return GridFunction(g, std::move(data));
}

inline void write_binary(const GridFunction& f, const std::string& path) { write_file_atomic(path, to_binary(f)); }

inline GridFunction read_binary(const std::string& path) { return from_binary(read_file(path)); }

/// CSV with header x,y,re,im; one row per cell.
inline std::string to_csv(const GridFunction& f) {
  std::string out = "x,y,re,im\n";
  char buf[128];
  const auto& g = f.grid();
  for (std::int64_t j = 0; j < g.ny; ++j)
    for (std::int64_t i = 0; i < g.nx; ++i) {
      Complex z = g.point(i, j), v = f.at(i, j);
      int n = std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", z.real(), z.imag(), v.real(), v.imag());
      out.append(buf, static_cast<std::size_t>(n));
    }
  return out;
}

inline void write_csv(const GridFunction& f, const std::string& path) { write_file_atomic(path, to_csv(f)); }

}  // namespace joris
