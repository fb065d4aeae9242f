#pragma once

#include "kblow/radial.hpp"
#include "kblow/rational.hpp"

#include <Eigen/Dense>
#include <boost/multiprecision/float128.hpp>

#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"

// Diagonal torus actions on a chart of C^n with the flat Kahler form, and the deformation
// problem for relatively stable points.
//
// Orientation: generator xi rotates z_i by exp(-i theta xi.w_i), so that d mu_xi = iota_X omega with
// omega = sum dx_i ^ dy_i. The complexified flow exp(i xi) x scales coordinate i by exp(-xi.w_i).
namespace kblow::moment {

using Point = Eigen::VectorXcd;
using Vector = Eigen::VectorXd;  // Lie-algebra vectors in generator coordinates
using Matrix = Eigen::MatrixXd;
using Quad = boost::multiprecision::float128;

class ActionModel {
public:
    ActionModel(std::vector<std::vector<long>> weights, std::vector<Rational> offset,
                std::vector<std::vector<Rational>> inner_product,
                double chart_radius = std::numeric_limits<double>::infinity());

    int n() const { return static_cast<int>(W_.cols()); }
    int rank() const { return static_cast<int>(W_.rows()); }
    const Matrix& weights() const { return W_; }
    const Matrix& inner_product() const { return G_; }
    double chart_radius() const { return chart_radius_; }

    // Components mu_X = 1/2 sum w_{X,i} |z_i|^2 - c_X, one per generator.
    Vector moment_components(const Point& z) const;
    // The Lie-algebra vector dual to the components under the inner product.
    Vector moment(const Point& z) const;

    double dot(const Vector& a, const Vector& b) const { return a.dot(G_ * b); }
    double norm(const Vector& a) const { return std::sqrt(dot(a, a)); }

    Point flow(const Point& x, const Vector& xi) const;             // exp(i xi) x
    Point rotate(const Point& x, const Vector& theta) const;        // exp(theta) x, compact part
    bool in_chart(const Point& z) const;

    // Maximum over a sample of points of |d mu_X(v) - omega(X, v)| by central differences.
    double moment_property_defect(const std::vector<Point>& sample, double h = 1e-6) const;

    nlohmann::json to_json() const;
    static ActionModel from_json(const nlohmann::json& j);

    // Shorthand: the standard S^1 on C and diagonal T^n on C^n with offsets 1/2.
    static ActionModel circle(double g = 1.0);
    static ActionModel diagonal(int n);

private:
    Matrix W_, G_;
    Vector c_;
    std::vector<std::vector<long>> w_int_;
    std::vector<Rational> c_exact_;
    std::vector<std::vector<Rational>> g_exact_;
    double chart_radius_;
};

// Columns form a G-orthonormal basis of the subspace.
struct Subspace {
    Matrix basis;
    int dim() const { return static_cast<int>(basis.cols()); }
};

Subspace stabilizer_at(const ActionModel& model, const Point& y, double tol = 1e-12);
Subspace orthogonal_complement(const ActionModel& model, const Subspace& s);
Subspace span(const ActionModel& model, const std::vector<Vector>& vectors, double tol = 1e-12);
Vector project_out(const ActionModel& model, const Subspace& s, const Vector& v);  // onto s^perp
Vector project_onto(const ActionModel& model, const Subspace& s, const Vector& v);

// Lie bracket; identically zero for the torus, kept so the commutation hypothesis is checked
// in the same shape as for a general group.
Vector bracket(const Vector& a, const Vector& b);

// Perturbation polynomial in the variables q_i = |z_i|^2: sum of coeff * prod q_i^{e_i}.
struct Monomial {
    double coeff = 0.0;
    std::vector<int> exponents;
};
using Polynomial = std::vector<Monomial>;

// Grammar: term ('+'|'-' term)*, term = [number ['*']] factor ('*' factor)*, factor = q<k>['^'<int>].
// q1 is |z_1|^2. A bare number is a constant term.
Polynomial parse_polynomial(const std::string& text, int n);
double evaluate(const Polynomial& p, const Point& z);

class PerturbedMap {
public:
    using Fn = std::function<Vector(const Point&)>;

    PerturbedMap(const ActionModel& base, Fn perturbation, double sup_bound);
    static PerturbedMap constant(const ActionModel& base, const Vector& shift);
    // Components are generator coordinates of the Lie-algebra perturbation.
    static PerturbedMap polynomial(const ActionModel& base, const std::vector<std::string>& components);
    static PerturbedMap from_json(const ActionModel& base, const nlohmann::json& j);

    const ActionModel& base() const { return *base_; }
    double sup_bound() const { return sup_bound_; }
    Vector perturbation(const Point& y) const { return fn_(y); }
    Vector operator()(const Point& y) const;  // mu + perturbation

    // Largest bracket against the stabilizer generators at y; throws above tol.
    double check_commutes(const Point& y, double tol = 1e-12) const;
    // Same map with the perturbation multiplied by lambda.
    PerturbedMap scaled(double lambda) const;

private:
    const ActionModel* base_;
    Fn fn_;
    double sup_bound_;
};

struct Projected {
    Vector value;  // in h_x^perp
    bool in_chart = true;
    double xi_norm = 0.0;
};

// P_xi(mu_eps(exp(i xi) x)) = Pi_x Pi_{exp(i xi) x} mu_eps(exp(i xi) x).
Projected projected_map(const ActionModel& model, const Point& x, const Vector& xi, const PerturbedMap& pm);
Projected projected_map(const ActionModel& model, const Point& x, const Vector& xi);

struct DeformOptions {
    double tol = 1e-12;
    double precondition_tol = 1e-9;  // relative
    double sup_threshold = 0.25;     // refuse perturbations this large relative to the model scale
    int max_newton = 50;
    int max_backtracks = 30;
    int homotopy_steps = 8;
    double fd_step = 1e-7;
};

struct DeformResult {
    Point y;
    Vector xi;
    double residual = 0.0;        // |P_xi(mu_eps(y))| on the reduced space
    double full_residual = 0.0;   // |Pi_y mu_eps(y)|, certifying mu_eps(y) in h_y
    int iterations = 0;
    bool used_homotopy = false;
    bool converged = false;
    Subspace torus;               // span of mu(x), split off before solving
    Subspace search;              // space the unknown xi ranges over
    std::vector<double> history;
};

class DeformError : public std::runtime_error {
public:
    DeformError(const std::string& what, double last_residual)
        : std::runtime_error(what), last_residual(last_residual) {}
    double last_residual;
};

DeformResult solve_deformed(const ActionModel& model, const Point& x, const PerturbedMap& pm,
                            const DeformOptions& opt = {});

nlohmann::json to_json(const DeformResult& r);

// Identity for the rotation field: with h = s A' and rho = -log det, the rotation
// Hamiltonian of the Ricci form is s rho'. iota_X rho = -d Laplacian h says their sum with the
// Laplacian of h is constant. Everything is differenced on the grid.
struct RicciMomentReport {
    double max_defect = 0.0;
    double at_s = 0.0;
    std::size_t n = 0;
};

// h is differenced three times, so it is taken in quad precision; the nodes are the
// profile's double values of s, which quad represents exactly.
RicciMomentReport ricci_moment_check(const radial::RadialProfile& profile, const std::vector<Quad>& h_values,
                                     int stencil = 3);
RicciMomentReport ricci_moment_check(const radial::RadialProfile& profile, const std::vector<double>& h_values,
                                     int stencil = 3);

struct RicciMomentRefinement {
    std::vector<std::size_t> sizes;
    std::vector<double> defects;
    std::vector<double> orders;
    bool converging = false;  // every observed order above min_order
};

// Reruns the check on geometric grids of n, 2n, 4n, ... points.
RicciMomentRefinement ricci_moment_refinement(int m, const std::function<radial::Potential(double)>& potential,
                                              const std::function<Quad(Quad)>& hamiltonian,
                                              double s_min, double s_max, std::size_t n, int levels,
                                              int stencil = 3, double min_order = 1.5);

}  // namespace kblow::moment
