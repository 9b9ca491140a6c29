#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "lesionuq/error.hpp"

namespace lesionuq {

inline constexpr std::size_t kDefaultMaxExtent = 512;

struct Voxel {
  int x = 0;
  int y = 0;
  int z = 0;
  friend auto operator<=>(const Voxel&, const Voxel&) = default;
};

/// Grid extents. Storage is x-fastest: index = x + nx * (y + ny * z),
/// which is C order for an array of shape (nz, ny, nx).
struct Dims {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t nz = 0;

  std::size_t voxel_count() const noexcept { return nx * ny * nz; }

  /// Throws ShapeError when any extent is zero or exceeds max_extent.
  void validate(std::size_t max_extent = kDefaultMaxExtent) const;

  bool contains(int x, int y, int z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && static_cast<std::size_t>(x) < nx &&
           static_cast<std::size_t>(y) < ny && static_cast<std::size_t>(z) < nz;
  }
  bool contains(const Voxel& v) const noexcept { return contains(v.x, v.y, v.z); }

  std::size_t linear(int x, int y, int z) const noexcept {
    return static_cast<std::size_t>(x) +
           nx * (static_cast<std::size_t>(y) + ny * static_cast<std::size_t>(z));
  }
  std::size_t linear(const Voxel& v) const noexcept { return linear(v.x, v.y, v.z); }

  Voxel to_xyz(std::size_t index) const noexcept {
    const auto x = index % nx;
    const auto rest = index / nx;
    return {static_cast<int>(x), static_cast<int>(rest % ny),
            static_cast<int>(rest / ny)};
  }

  friend bool operator==(const Dims&, const Dims&) = default;
};

/// Dense scalar field over a Dims grid.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  explicit Grid(Dims dims, T fill = T{}) : dims_(dims), data_(dims.voxel_count(), fill) {}
  Grid(Dims dims, std::vector<T> data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.voxel_count()) {
      throw ShapeError("grid payload length " + std::to_string(data_.size()) +
                       " does not match dims voxel count " +
                       std::to_string(dims_.voxel_count()));
    }
  }

  const Dims& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }
  T& at(int x, int y, int z) noexcept { return data_[dims_.linear(x, y, z)]; }
  const T& at(int x, int y, int z) const noexcept { return data_[dims_.linear(x, y, z)]; }
  T& at(const Voxel& v) noexcept { return data_[dims_.linear(v)]; }
  const T& at(const Voxel& v) const noexcept { return data_[dims_.linear(v)]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  Dims dims_{};
  std::vector<T> data_;
};

using Volume = Grid<double>;
using LabelVolume = Grid<std::uint32_t>;

/// Throws DataError on the first NaN or infinity.
void require_finite(const Volume& v);

/// True when the volume only holds 0 and 1.
bool is_binary(const LabelVolume& labels) noexcept;

/// Largest label value; 0 for an empty or all-background volume.
std::uint32_t max_label(const LabelVolume& labels) noexcept;

/// T foreground-probability volumes from stochastic forward passes.
struct McEnsemble {
  std::vector<Volume> samples;

  std::size_t sample_count() const noexcept { return samples.size(); }
  /// Throws InputError unless T >= 2, dims agree and values lie in [0, 1].
  void validate() const;
};

}  // namespace lesionuq
