#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "phi42/core.hpp"

namespace phi42 {

/// Uniform lattice on [t0, t0 + (n_t-1) dt] x [-L, L)^2.
///
/// Space is periodic: node i sits at x = -L + i*dx and n_x*dx = 2L. All
/// spatial convolutions in the library are circular on this torus.
class SpaceTimeGrid {
public:
    SpaceTimeGrid() = default;

    SpaceTimeGrid(std::size_t n_t, std::size_t n_x, std::size_t n_y, double dt, double dx, double dy,
                  double t0 = 0.0)
        : n_t_(n_t), n_x_(n_x), n_y_(n_y), dt_(dt), dx_(dx), dy_(dy), t0_(t0) {
        if (n_t < 2 || n_x < 2 || n_y < 2) throw InvalidArgument("grid needs at least 2 nodes per axis");
        if (!(dt > 0.0) || !(dx > 0.0) || !(dy > 0.0)) throw InvalidArgument("grid steps must be positive");
        if (!std::isfinite(t0)) throw InvalidArgument("t0 must be finite");
        constexpr auto max_index = static_cast<std::size_t>(std::numeric_limits<std::ptrdiff_t>::max());
        if (n_x > max_index / n_y || n_x * n_y > max_index / n_t)
            throw IndexOverflow("cell count overflows the index type");
    }

    /// Square grid with box half-width L; dx = 2L / n_x.
    static SpaceTimeGrid square(std::size_t n_t, std::size_t n_x, double dt, double half_width, double t0 = 0.0) {
        const double dx = 2.0 * half_width / static_cast<double>(n_x);
        return {n_t, n_x, n_x, dt, dx, dx, t0};
    }

    std::size_t n_t() const { return n_t_; }
    std::size_t n_x() const { return n_x_; }
    std::size_t n_y() const { return n_y_; }
    double dt() const { return dt_; }
    double dx() const { return dx_; }
    double dy() const { return dy_; }
    double t0() const { return t0_; }
    double half_width() const { return 0.5 * static_cast<double>(n_x_) * dx_; }
    double half_width_y() const { return 0.5 * static_cast<double>(n_y_) * dy_; }
    double t_end() const { return t0_ + static_cast<double>(n_t_ - 1) * dt_; }

    std::size_t slice_size() const { return n_x_ * n_y_; }
    std::size_t size() const { return n_t_ * n_x_ * n_y_; }
    double cell_area() const { return dx_ * dy_; }
    double cell_volume() const { return dt_ * dx_ * dy_; }

    /// Row-major index, t slowest, y fastest.
    std::size_t index(std::size_t it, std::size_t ix, std::size_t iy) const { return (it * n_x_ + ix) * n_y_ + iy; }

    double t(std::size_t it) const { return t0_ + static_cast<double>(it) * dt_; }
    double x(std::size_t ix) const { return -half_width() + static_cast<double>(ix) * dx_; }
    double y(std::size_t iy) const { return -half_width_y() + static_cast<double>(iy) * dy_; }

    SpaceTimePoint point(std::size_t it, std::size_t ix, std::size_t iy) const { return {t(it), {x(ix), y(iy)}}; }

    /// Index of the time node nearest to t (clamped).
    std::size_t time_index(double t) const {
        const double r = std::round((t - t0_) / dt_);
        return static_cast<std::size_t>(std::clamp(r, 0.0, static_cast<double>(n_t_ - 1)));
    }

    /// Index of the first time node with t >= 0 (the initial-data slice).
    std::size_t origin_index() const {
        const double r = std::ceil(-t0_ / dt_ - 1e-9);
        return static_cast<std::size_t>(std::max(0.0, r));
    }

    /// Minimal-image signed offset along a periodic axis.
    static double wrap(double d, double period) { return d - period * std::round(d / period); }

    Vec2 spatial_offset(const Vec2& a, const Vec2& b) const {
        return {wrap(a[0] - b[0], 2.0 * half_width()), wrap(a[1] - b[1], 2.0 * half_width_y())};
    }

    /// dt within a factor 4 of dx^2.
    bool is_parabolic() const {
        const double r = dt_ / (dx_ * dx_);
        return r >= 0.25 && r <= 4.0;
    }

    friend bool operator==(const SpaceTimeGrid&, const SpaceTimeGrid&) = default;

private:
    std::size_t n_t_ = 0, n_x_ = 0, n_y_ = 0;
    double dt_ = 0.0, dx_ = 0.0, dy_ = 0.0, t0_ = 0.0;
};

/// One lattice function.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const SpaceTimeGrid& grid, double fill = 0.0) : grid_(grid), values_(grid.size(), fill) {}
    ScalarField(const SpaceTimeGrid& grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
        if (values_.size() != grid_.size()) throw DimensionMismatch("field size does not match grid");
    }

    const SpaceTimeGrid& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::vector<double>& data() { return values_; }
    const std::vector<double>& data() const { return values_; }

    double& operator()(std::size_t it, std::size_t ix, std::size_t iy) { return values_[grid_.index(it, ix, iy)]; }
    double operator()(std::size_t it, std::size_t ix, std::size_t iy) const { return values_[grid_.index(it, ix, iy)]; }

    std::span<const double> slice(std::size_t it) const {
        return std::span<const double>(values_).subspan(it * grid_.slice_size(), grid_.slice_size());
    }
    std::span<double> slice(std::size_t it) {
        return std::span<double>(values_).subspan(it * grid_.slice_size(), grid_.slice_size());
    }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

private:
    SpaceTimeGrid grid_;
    std::vector<double> values_;
};

inline void require_same_grid(const ScalarField& a, const ScalarField& b) {
    if (!(a.grid() == b.grid())) throw GridMismatch("fields live on different grids");
}

}  // namespace phi42
