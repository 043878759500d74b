#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace phi42 {

// Error hierarchy. Every failure mode named in the public contracts has its
// own type so callers (and the CLI exit-code mapping) can dispatch on it.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define PHI42_DEFINE_ERROR(Name)                          \
    class Name : public Error {                           \
    public:                                               \
        explicit Name(const std::string& what)            \
            : Error(std::string(#Name ": ") + what) {}    \
    }

PHI42_DEFINE_ERROR(InvalidArgument);
PHI42_DEFINE_ERROR(IndexOverflow);
PHI42_DEFINE_ERROR(UnresolvableScale);
PHI42_DEFINE_ERROR(EllipticityViolation);
PHI42_DEFINE_ERROR(EmptyRegion);
PHI42_DEFINE_ERROR(SingularMatrix);
PHI42_DEFINE_ERROR(NoBoundFound);
PHI42_DEFINE_ERROR(QuadratureFailure);
PHI42_DEFINE_ERROR(DimensionMismatch);
PHI42_DEFINE_ERROR(DegreeTooLarge);
PHI42_DEFINE_ERROR(RankTooLarge);
PHI42_DEFINE_ERROR(GridMismatch);
PHI42_DEFINE_ERROR(SupportEscapesGrid);
PHI42_DEFINE_ERROR(LinearSolveFailure);
PHI42_DEFINE_ERROR(BudgetExceeded);
PHI42_DEFINE_ERROR(InsufficientPoints);
PHI42_DEFINE_ERROR(LedgerCorrupt);
PHI42_DEFINE_ERROR(ConfigError);

#undef PHI42_DEFINE_ERROR

inline constexpr double pi = std::numbers::pi;

using Vec2 = std::array<double, 2>;

inline double norm2(const Vec2& v) { return v[0] * v[0] + v[1] * v[1]; }

struct SpaceTimePoint {
    double t = 0.0;
    Vec2 x{0.0, 0.0};
};

/// Parabolic distance |z - z'| = sqrt(|t - t'| + |x - x'|^2).
inline double parabolic_distance(const SpaceTimePoint& a, const SpaceTimePoint& b) {
    const Vec2 d{a.x[0] - b.x[0], a.x[1] - b.x[1]};
    return std::sqrt(std::abs(a.t - b.t) + norm2(d));
}

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct SymMat2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    static SymMat2 identity() { return {1.0, 0.0, 1.0}; }
    static SymMat2 scalar(double s) { return {s, 0.0, s}; }

    double det() const { return xx * yy - xy * xy; }
    double trace() const { return xx + yy; }

    SymMat2 inverse() const {
        const double d = det();
        if (!(d > 0.0)) throw SingularMatrix("determinant " + std::to_string(d));
        return {yy / d, -xy / d, xx / d};
    }

    /// Eigenvalues, ascending.
    std::array<double, 2> eigenvalues() const {
        const double m = 0.5 * (xx + yy);
        const double r = std::hypot(0.5 * (xx - yy), xy);
        return {m - r, m + r};
    }

    double quad(const Vec2& v) const { return xx * v[0] * v[0] + 2.0 * xy * v[0] * v[1] + yy * v[1] * v[1]; }

    friend SymMat2 operator+(const SymMat2& a, const SymMat2& b) { return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy}; }
    friend SymMat2 operator*(double s, const SymMat2& a) { return {s * a.xx, s * a.xy, s * a.yy}; }
    friend bool operator==(const SymMat2&, const SymMat2&) = default;
};

/// Density of the centred Gaussian N(0, cov) on R^2.
inline double gaussian_density_cov(const SymMat2& cov, const Vec2& y) {
    const double d = cov.det();
    const SymMat2 inv = cov.inverse();
    return std::exp(-0.5 * inv.quad(y)) / (2.0 * pi * std::sqrt(d));
}

}  // namespace phi42
