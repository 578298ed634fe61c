#pragma once

#include "mim/field.hpp"

#include <map>
#include <vector>

namespace mim {

using GridPoint = std::vector<int>;

// Sum over m of (y - a)^m f_m(y) with periodic coefficient fields f_m and anchor a,
// living on the covering space of the torus. Grid points are taken unwrapped, so a
// point's coordinates are idx * spacing even outside the fundamental cell.
class PolyField {
public:
    PolyField() = default;
    PolyField(const TorusSpec& s, std::vector<double> anchor);

    static PolyField periodic(const Field& f);
    static PolyField periodic(const Field& f, std::vector<double> anchor);
    // (y - a)^n
    static PolyField monomial(const TorusSpec& s, std::vector<double> anchor, const SpaceIndex& n);

    const TorusSpec& spec() const { return spec_; }
    const std::vector<double>& anchor() const { return anchor_; }
    const std::map<SpaceIndex, Field>& terms() const { return terms_; }
    bool empty() const { return terms_.empty(); }
    // highest parabolic weight among polynomial factors
    int degree() const;

    void add_term(const SpaceIndex& m, const Field& f, double scale = 1.0);
    PolyField reanchored(const std::vector<double>& anchor) const;

    PolyField& operator+=(const PolyField& o);
    PolyField& operator-=(const PolyField& o);
    PolyField& add_scaled(const PolyField& o, double a);
    PolyField operator+(const PolyField& o) const { PolyField r = *this; return r += o; }
    PolyField operator-(const PolyField& o) const { PolyField r = *this; return r -= o; }
    PolyField operator*(const PolyField& o) const;
    PolyField operator*(double a) const;

    // L^{-1} in the torus gauge: zero modes of all periodic coefficients are dropped
    PolyField heat_inverse() const;

    // values at the grid points of the fundamental cell
    Field sample() const;
    std::vector<double> value_at(const std::vector<GridPoint>& pts) const;
    // (1/n!) d^n at each point, for each requested n
    std::map<SpaceIndex, std::vector<double>> jets_at(const std::vector<SpaceIndex>& ns,
                                                      const std::vector<GridPoint>& pts) const;
    // convolution with the semigroup kernel at scale r, evaluated at each point
    std::map<double, std::vector<double>> convolve_at(const std::vector<double>& rs,
                                                      const std::vector<GridPoint>& pts) const;

private:
    TorusSpec spec_;
    std::vector<double> anchor_;
    std::map<SpaceIndex, Field> terms_;
};

std::vector<double> point_coords(const TorusSpec& s, const GridPoint& x);

// Fourier symbol of w -> w^k psi_t(w) evaluated at q, psi_t the semigroup kernel at time t = r^4.
cplx semigroup_moment_symbol(const WaveVector& q, const SpaceIndex& k, double t);

// int psi_t(w) w^k dw for the semigroup kernel
double semigroup_moment(int d, const SpaceIndex& k, double t);

}  // namespace mim
