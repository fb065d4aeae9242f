#pragma once

#include "kblow/radial.hpp"
#include "kblow/rational.hpp"

#include <string>
#include <vector>

#include "json.hpp"

// Scalar-flat U(m)-invariant metric on the blowup of C^m at the origin.
// In t = 1/s the profile f = A' is xi(t), with xi^{m-1} xi' = (m-1) t^{m-2} xi - (m-2) t^{m-1}
// and xi(0) = 1/2. The potential is A(s) = s/2 + psi, psi(t) = -int_0^t (xi - 1/2)/u^2 du.
namespace kblow::bs {

struct BSSeries {
    int m = 3;
    std::vector<Rational> c;  // xi = sum c_j t^j
    bool closed_form = false;  // m = 2: xi = 1/2 + t exactly

    int order() const { return static_cast<int>(c.size()) - 1; }
    double xi(double t) const;
    double psi(double t) const;  // term-by-term integral; m >= 3 only
};

BSSeries bs_series(int m, int order);

// Coefficients of xi^{m-1} xi' - (m-1) t^{m-2} xi + (m-2) t^{m-1} through t^{order-1}.
std::vector<Rational> ode_residual(const BSSeries& s);

struct SolveOptions {
    double t_seed = 1e-3;   // series hand-off point
    int series_order = 40;
    double t_switch = 10.0; // beyond this the solution is carried in log s near the divisor
    double t_max = 1e8;
    int steps = 4000;       // stored nodes, uniform in log t
    double rel_tol = 1e-13;
    double abs_tol = 1e-15;
};

class BurnsSimanca {
public:
    explicit BurnsSimanca(int m, SolveOptions opt = {});

    int m() const { return m_; }
    const BSSeries& series() const { return series_; }
    const SolveOptions& options() const { return opt_; }

    // Raw (un-normalised) solution in the t variable.
    double xi(double t) const;
    double psi(double t) const;
    double xi_prime(double t) const;

    // Normalisation s -> kappa^2 s, A -> A/kappa^2 making psi = -|z|^{4-2m} + ...
    double kappa() const { return kappa_; }
    // d = 1/kappa^2: A ~ d log s near the exceptional divisor, which is also the moment value there.
    double divisor_moment() const { return 1.0 / (kappa_ * kappa_); }

    // Jets in s of the normalised potential and of psi = A - s/2. Near the divisor the
    // logarithm divisor_moment() * log s is split off.
    radial::Potential potential_jet(double s) const;
    radial::Potential psi_jet(double s) const;
    double psi_normalized(double s) const;

    radial::RadialProfile profile(const std::vector<double>& s_grid) const;
    double last_good_t() const { return last_good_t_; }

private:
    struct Node {
        double lambda, eta, psi;
    };
    // u = log s (raw), y = s f - 1, ahat = A - log s.
    struct InnerNode {
        double u, y, ahat;
    };
    void integrate();
    void integrate_inner();
    void state_at(double t, double& eta, double& psi) const;
    void inner_state_at(double sigma, double& y, double& ahat) const;
    radial::Jet raw_psi_jet_t(double t0) const;  // jet in t of the raw psi
    radial::Jet raw_ahat_jet(double sigma0) const;  // jet in raw s of A - log s

    int m_;
    SolveOptions opt_;
    BSSeries series_;
    std::vector<Node> nodes_;
    std::vector<InnerNode> inner_;
    double kappa_ = 1.0;
    double last_good_t_ = 0.0;
};

// Shorthand matching the operation list: integrate to t_max with the given node count.
BurnsSimanca bs_solve(int m, double t_max, int steps);

struct Asymptotics {
    double leading = 0.0;        // fitted coefficient of |z|^{4-2m}
    double a = 0.0;              // coefficient of |z|^{2-2m} with the leading term fixed at -1
    double a_series = 0.0;       // same coefficient from the exact series
    double decay_exponent = 0.0; // fitted p in |remainder| ~ |z|^{-p}
    double expected_exponent = 0.0;
    double r_min = 0.0, r_max = 0.0;
    bool consistent = false;     // decay_exponent >= expected - 0.5
};

Asymptotics asymptotics(const BurnsSimanca& bs, double r_min = 0.0, double r_max = 0.0, int samples = 60);

// CSV rows s,f,scalar,psi for the normalised profile and a JSON metadata block.
std::string profile_csv(const BurnsSimanca& bs, const std::vector<double>& s_grid);
nlohmann::json metadata(const BurnsSimanca& bs, const Asymptotics& asym);

}  // namespace kblow::bs
