#pragma once

#include "kblow/fd.hpp"
#include "kblow/taylor.hpp"

#include <functional>
#include <vector>

// U(m)-invariant Kähler metrics i dd^c A(s), s = |z|^2, on a punctured ball of C^m.
// Conventions: complex Laplacian g^{ij} d_i d_jbar; scalar curvature -Laplacian(log det g).
// The two metric eigenvalues are f = A' (multiplicity m-1) and f + s f' (radial direction).
namespace kblow::radial {

using Jet = Taylor<8>;

// A(s) = log_coeff * log s + smooth(s). Splitting off the logarithm keeps f + s f' free of
// cancellation next to an exceptional divisor, where f ~ log_coeff / s.
struct Potential {
    Jet smooth;
    double log_coeff = 0.0;

    Potential() = default;
    Potential(const Jet& a) : smooth(a) {}
    Potential(const Jet& a, double d) : smooth(a), log_coeff(d) {}
};

// Pointwise operators acting on Taylor jets in s. Every derivative uses up one order of the jet,
// so the returned jet is only reliable in its low coefficients.
Jet laplacian(int m, const Jet& s, const Potential& potential, const Jet& u);
Jet ricci_potential(int m, const Jet& s, const Potential& potential);  // -log det g
Jet scalar_curvature(int m, const Jet& s, const Potential& potential);
Jet ricci_hessian(int m, const Jet& s, const Potential& potential, const Jet& phi);  // Ric^{ij} phi_{ij}
Jet gradient_dot(int m, const Jet& s, const Potential& potential, const Jet& a, const Jet& b);
Jet lichnerowicz(int m, const Jet& s, const Potential& potential, const Jet& phi);

// s(A + u) - s(A), arranged so that every term is proportional to u. Keeps relative accuracy
// when u is far below the roundoff level of s(A) itself.
Jet scalar_curvature_change(int m, const Jet& s, const Potential& potential, const Jet& u);

// Rotation Hamiltonian s A'(s) (up to sign and constants) and its jet.
Jet moment(const Jet& s, const Potential& potential);

inline Jet variable(double s0) { return Jet::variable(s0); }

std::vector<double> geometric_grid(double s_min, double s_max, std::size_t n);

struct RadialProfile {
    int m = 1;
    std::vector<double> s;
    std::vector<double> f, f1, f2, f3;  // f = A' and its s-derivatives
    std::vector<double> g, g1, g2;      // radial eigenvalue f + s f' and its s-derivatives

    std::size_t size() const { return s.size(); }

    // Exact derivatives at every node from a potential-jet provider.
    static RadialProfile from_jets(int m, std::vector<double> grid, const std::function<Potential(double)>& potential_jet);
    // f sampled on a geometric grid; derivatives by finite differences in log s.
    static RadialProfile from_values(int m, std::vector<double> grid, std::vector<double> f_values, int stencil = 7);

    RadialProfile scaled(double c) const;  // profile of c*A(s/c)
    bool positive() const;
    void require_positive() const;

    std::vector<double> det_factor() const;         // f^{m-1} (f + s f')
    std::vector<double> ricci_potential() const;    // -log det
};

std::vector<double> radial_scalar_curvature(const RadialProfile& p);

// Grid operators; derivatives of the grid function use centred differences in log s.
class GridOperators {
public:
    explicit GridOperators(const RadialProfile& p, int stencil = 7);

    const RadialProfile& profile() const { return *p_; }
    std::vector<double> derivative(const std::vector<double>& u, int order) const;  // d^k/ds^k
    std::vector<double> laplacian(const std::vector<double>& u) const;
    std::vector<double> gradient_dot(const std::vector<double>& a, const std::vector<double>& b) const;
    std::vector<double> ricci_hessian(const std::vector<double>& phi) const;
    std::vector<double> lichnerowicz(const std::vector<double>& phi) const;
    std::vector<double> scalar_curvature() const { return scalar_; }

    // Nodes within this many points of either end are unreliable after nested stencils.
    std::size_t boundary_layer() const { return static_cast<std::size_t>(2 * stencil_); }

private:
    const RadialProfile* p_;
    int stencil_;
    fd::Differentiator d_;
    std::vector<double> scalar_, rho1_, rho2_;
};

}  // namespace kblow::radial
