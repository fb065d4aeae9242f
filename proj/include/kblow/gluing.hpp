#pragma once

#include "kblow/bs.hpp"
#include "kblow/radial.hpp"
#include "kblow/rational.hpp"

#include <Eigen/Dense>

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

// Gluing the scalar-flat blowup metric into Fubini-Study P^m at a point, at U(m)-invariant
// radial scale. The chart is s = |z|^2 around the point and the base potential is
// (1/2) log(1 + s), so the base is cscK with scalar curvature 2m(m+1) and moment interval [0, 1/2].
//
// Sign convention: with the positive fourth-order operator D*D = Laplacian^2 + Ric.Hess (+ drift),
// s(w + i dd^c u) = s(w) - D*D u + ..., so the corrected metric carries extremal Hamiltonian
// s - eps^{2m-2} h. All residuals below use that target.
namespace kblow::gluing {

using radial::Jet;
using radial::Potential;

struct GluingConfig {
    int m = 3;
    double eps = 0.1;
    double r_eps = 0.0;   // 0: eps^{(2m-1)/(2m+1)}
    double delta = 0.0;   // 0: 4 - 2m + 0.1 for m >= 3, -theta for m = 2
    int k = 4;
    double alpha = 0.0;
    double a_upper = 0.0;  // 0: (1 + a) / 2, with a = log r_eps / log eps
    double a_lower = 0.0;  // 0: a / 2
    double theta = 0.0;    // inverse-bound loss; 0 for m >= 3, default 0.1 for m = 2
    // radial grid for the residual: s in [sigma_min eps^2, s_max]
    double sigma_min = 1e-4;
    double s_max = 100.0;
    std::size_t points = 2000;

    // Copy with every defaulted field filled in; throws on an inconsistent configuration.
    GluingConfig resolved() const;
    double cutoff_exponent() const;  // a
    double eps_prime() const;        // eps^{2m-2}

    nlohmann::json to_json() const;
    static GluingConfig from_json(const nlohmann::json& j);
};

// Template step: 0 for t <= 1, 1 for t >= 2, smooth, built from exp(-1/x).
double smooth_step(double t);
Jet smooth_step(const Jet& t);

double gamma1(const GluingConfig& cfg, double r);
double gamma2(const GluingConfig& cfg, double r);
double beta1(const GluingConfig& cfg, double r);
double beta2(const GluingConfig& cfg, double r);
Jet gamma1_jet(const GluingConfig& cfg, const Jet& s);  // as a function of s = r^2

struct Cutoffs {
    std::vector<double> r, gamma1, gamma2, beta1, beta2;
    double max_r_grad_beta1 = 0.0;  // max |r d/dr beta1|
    bool supports_ok = false;
    std::string violations;
};

Cutoffs cutoffs(const GluingConfig& cfg, const std::vector<double>& r);

// Radial solution of D*D Gamma = h on P^m minus the point, with Gamma = singular part + smooth
// corrections. In X = s / (1 + s):
//   Gamma = sum_n power[n] X^{n + lowest} + log X sum_n logs[n] X^n,
//   h = h_const + h_slope (X - mean),  mean = m / (m + 1).
// The singular part is -s^{2-m} for m >= 3 and (1/kappa^2) log s for m = 2, matching the
// blowup metric's expansion. The kernel {1, X} is normalised away.
struct GammaSolution {
    int m = 3;
    int lowest = -1;
    std::vector<Rational> power, logs;
    Rational h_const, h_slope, mean;
    double singular_log = 0.0;  // m = 2 only
    double volume = 0.0;        // of the base, for omega^m / m!
    double c_m = 0.0;           // integral of h
    double lambda = 0.0;        // c_m / volume

    Jet in_x(const Jet& X) const;       // Gamma as a function of X
    Jet value(const Jet& s) const;      // Gamma(s)
    Jet singular(const Jet& s) const;   // its singular part
    Jet regular(const Jet& s) const;    // Gamma minus singular part
    double h(double X) const;
    nlohmann::json to_json() const;
};

GammaSolution solve_gamma(int m);
double base_scalar(int m);            // 2m(m+1)
Jet base_potential(const Jet& s);     // (1/2) log(1 + s)
// Pairing integral of h g over P^m with g(X) = X^power, by composite Simpson in the moment variable.
double pairing_integral(const GammaSolution& g, int power, int intervals = 2000);

enum class Zone { Inner, Annulus, Outer };

// Immutable glued metric. with_gamma selects the corrected metric; otherwise it is the
// plain glued metric.
class GluedProfile {
public:
    GluedProfile(const GluingConfig& cfg, std::shared_ptr<const bs::BurnsSimanca> bs,
                 std::shared_ptr<const GammaSolution> gamma, bool with_gamma);

    const GluingConfig& config() const { return cfg_; }
    bool with_gamma() const { return with_gamma_; }
    const bs::BurnsSimanca& bs() const { return *bs_; }
    const GammaSolution& gamma() const { return *gamma_; }
    std::shared_ptr<const bs::BurnsSimanca> bs_ptr() const { return bs_; }
    std::shared_ptr<const GammaSolution> gamma_ptr() const { return gamma_; }

    Zone zone(double s) const;
    Potential potential(double s) const;              // the selected glued metric
    Potential uncorrected_potential(double s) const;  // without the Gamma term
    Jet correction(double s) const;                   // eps' gamma1 Gamma, zero without Gamma
    Potential model_potential(double s) const;        // eps^2 times the scaled blowup metric
    double lifted_h(double s) const;                  // lift of h through the uncorrected moment

    const std::vector<double>& s() const { return s_; }
    std::vector<double> r() const;
    const std::vector<double>& values() const { return values_; }
    const radial::RadialProfile& profile() const { return profile_; }

private:
    GluingConfig cfg_;
    std::shared_ptr<const bs::BurnsSimanca> bs_;
    std::shared_ptr<const GammaSolution> gamma_;
    bool with_gamma_;
    std::vector<double> s_, values_;
    radial::RadialProfile profile_;
};

class PositivityError : public std::runtime_error {
public:
    PositivityError(const std::string& what, double r) : std::runtime_error(what), r(r) {}
    double r;
};

GluedProfile glued_potential(const GluingConfig& cfg, bool with_gamma);
GluedProfile glued_potential(const GluingConfig& cfg, std::shared_ptr<const bs::BurnsSimanca> bs,
                             std::shared_ptr<const GammaSolution> gamma, bool with_gamma);

// Weighted norms. rho(r) is eps on B_eps, r on the neck and 1 outside B_1 on the blown-up
// manifold; r then 1 on the punctured base; 1 then r on the model.
enum class Region { Blowup, Base, Model };

double weight_scale(Region region, double r, double eps);

struct NormGrid {
    std::vector<double> coord;  // monotone coordinate used for differencing
    std::vector<double> speed;  // |grad coord|, so speed * d/dcoord is a unit radial derivative
    std::vector<double> r;
};

// sum_{j <= k} sup rho^{j - weight} |D^j f|, plus the Holder seminorm of D^k f when alpha > 0.
// For k > 0 the stencil boundary layer is excluded.
double weighted_norm(const std::vector<double>& f, const NormGrid& grid, double eps, double weight, int k,
                     Region region = Region::Blowup, double alpha = 0.0);

NormGrid norm_grid(const GluedProfile& glued);

struct Residual {
    std::vector<double> s, r, F;
    double norm = 0.0;
    double peak_r = 0.0;
    double zone_norm[3] = {0.0, 0.0, 0.0};  // inner, annulus, outer
};

// F = l(s) - eps' l(h) - s(corrected metric) - (1/2) grad(eps' l(h)) . grad(eps' gamma1 Gamma).
// Without Gamma, F = l(s) - s(glued metric). Norm: weighted sup with weight delta - 4.
Residual residual_F(const GluedProfile& glued);
double residual_at(const GluedProfile& glued, double s);

struct ScalingRow {
    double eps = 0.0, r_eps = 0.0, norm = 0.0, slope_so_far = 0.0, peak_r = 0.0;
};

struct ScalingResult {
    std::vector<ScalingRow> rows;
    double slope = 0.0;
    double expected = 0.0;  // 4 - delta
    bool monotone = true;
    bool with_gamma = true;
};

class ScalingError : public std::runtime_error {
public:
    ScalingError(const std::string& what, ScalingResult r) : std::runtime_error(what), result(std::move(r)) {}
    ScalingResult result;
};

ScalingResult scaling_experiment(const GluingConfig& tmpl, const std::vector<double>& eps_list,
                                 bool with_gamma = true, int jobs = 1);
std::string scaling_csv(const ScalingResult& r);
nlohmann::json to_json(const ScalingResult& r);

// Extremal problem on the glued manifold in the moment coordinate x of the corrected metric.
// Unknowns: v on the x-grid (u = eps' gamma1 Gamma + v) and g = g0 + g1 (X - mean) added to the
// target Hamiltonian s - eps' h. The residual is
//   E = s(w_u) - (1/2) grad l(f) . grad u - l(f),
// which in moment variables is s(w_u) - c - 2b X_u with X_u = x + Theta dv/dx.
class MomentProblem {
public:
    static constexpr int width = 7;

    MomentProblem(const GluedProfile& glued, std::size_t n, double cluster = 0.5);
    // The unglued base itself, moment interval [0, 1/2]. For sanity checks.
    static MomentProblem base(int m, std::size_t n);

    int m() const { return m_; }
    std::size_t size() const { return x_.size(); }
    const std::vector<double>& x() const { return x_; }
    const std::vector<double>& y() const { return y_; }  // x - x_min, without cancellation
    const std::vector<double>& theta() const { return th_[0]; }
    const std::vector<double>& r() const { return r_; }
    const std::vector<double>& s_of_node() const { return s_; }  // NaN on the inner zone
    double x_min() const { return x_min_; }
    double x_max() const { return x_max_; }
    double eps() const { return eps_; }

    // Target Hamiltonian c + 2 b X for g = (g0, g1).
    void target(double g0, double g1, double& c, double& b) const;

    std::vector<double> residual(const std::vector<double>& v, double g0, double g1) const;
    // Rows: residuals then the two normalisations; columns: v then g0, g1.
    Eigen::MatrixXd jacobian(const std::vector<double>& v, double g0, double g1) const;
    Eigen::VectorXd system(const std::vector<double>& v, double g0, double g1) const;

    // Moment profile Theta_u(X_u) of the perturbed metric at each node.
    void perturbed_profile(const std::vector<double>& v, std::vector<double>& X, std::vector<double>& Theta) const;

    double residual_norm(const std::vector<double>& E) const;       // C^0 with weight delta - 4
    double solution_norm(const std::vector<double>& v) const;        // C^k with weight delta
    NormGrid grid() const;
    const GluingConfig& config() const { return cfg_; }

private:
    MomentProblem() = default;
    void finish();

    int m_ = 3;
    GluingConfig cfg_;
    double eps_ = 0.0, x_min_ = 0.0, x_max_ = 0.5;
    std::vector<double> x_, y_, r_, s_;
    std::vector<double> th_[4];  // Theta and its first three x-derivatives
    std::vector<double> quad_;   // trapezoid weights times x^{m-1}
    double c_ref_ = 0.0, b_ref_ = 0.0, h_slope_ = 0.0, h_mean_ = 0.0;
    fd::Differentiator d_;
};

double extremal_residual(const MomentProblem& p, const std::vector<double>& v, double g0, double g1);

struct FixedPointOptions {
    std::size_t points = 600;
    int max_iters = 20;
    double stop_ratio = 1e-9;         // stop once the residual drops this far below the initial one
    double condition_threshold = 1e12; // above this a failed run is downgraded to a warning
    double cluster = 0.5;
};

struct FixedPointIterate {
    int iteration = 0;
    double residual = 0.0, v_norm = 0.0, g_abs = 0.0;
};

struct FixedPointResult {
    std::vector<double> v;
    double g0 = 0.0, g1 = 0.0;
    std::vector<FixedPointIterate> history;
    double initial_residual = 0.0;
    double c1 = 0.0;           // fitted from the first iterate
    double ball_radius = 0.0;  // 2 c1 r_eps^{4-delta} eps^{-theta}
    double condition = 0.0;
    bool monotone = false, converged = false, in_ball = false;
    // Hamiltonian split f = s - eps' h + g with g = g0 + g1 (X - mean).
    GluingConfig config;
};

FixedPointResult fixed_point_iterate(const GluedProfile& glued, const FixedPointOptions& opt = {});
FixedPointResult fixed_point_iterate(const MomentProblem& problem, const FixedPointOptions& opt = {});
std::string fixed_point_csv(const FixedPointResult& r);
nlohmann::json to_json(const FixedPointResult& r);

}  // namespace kblow::gluing
