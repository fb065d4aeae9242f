#pragma once

#include "kblow/rational.hpp"

#include <map>
#include <string>

#include "json.hpp"

namespace kblow::futaki {

// Top coefficients of d_k = a0 k^m + a1 k^(m-1) + ... and w_k = b0 k^(m+1) + b1 k^m + ...
struct PolarizedData {
    int m = 1;
    Rational a0 = 1, a1 = 0, b0 = 0, b1 = 0;
};

// Hamiltonian data at the blown-up point. The weight on the cotangent space is -lap_h_p.
struct BlowupPoint {
    Rational h_p = 0;
    Rational lap_h_p = 0;

    Rational cotangent_weight() const;
    Rational fibre_weight() const;
};

// The single place where the sign convention lives: the fibre of L over p carries weight -h(p)
// and the cotangent space carries weight -Delta h(p).
BlowupPoint point_from_weights(const Rational& fibre_weight, const Rational& cotangent_weight);

/// Polynomial in one formal variable with exact coefficients, kept without zero entries.
class ExactExpansion {
public:
    explicit ExactExpansion(std::string variable = "eps") : var_(std::move(variable)) {}

    static ExactExpansion constant(const Rational& c, std::string variable = "eps");
    static ExactExpansion monomial(const Rational& c, long exponent, std::string variable = "eps");

    const std::string& variable() const { return var_; }
    const std::map<long, Rational>& coefficients() const { return coeffs_; }

    Rational coeff(long exponent) const;
    void set(long exponent, const Rational& value);
    bool is_zero() const { return coeffs_.empty(); }
    long lowest_exponent() const;
    long highest_exponent() const;

    ExactExpansion truncated(long max_exponent) const;
    Rational evaluate(const Rational& x) const;

    // Power series of 1/this up to x^order; needs a nonzero constant term.
    ExactExpansion inverse_series(long order) const;

    ExactExpansion& operator+=(const ExactExpansion& o);
    ExactExpansion& operator-=(const ExactExpansion& o);
    ExactExpansion& operator*=(const Rational& c);
    friend ExactExpansion operator+(ExactExpansion a, const ExactExpansion& b) { return a += b; }
    friend ExactExpansion operator-(ExactExpansion a, const ExactExpansion& b) { return a -= b; }
    friend ExactExpansion operator*(ExactExpansion a, const Rational& c) { return a *= c; }
    friend ExactExpansion operator*(const Rational& c, ExactExpansion a) { return a *= c; }
    friend ExactExpansion operator*(const ExactExpansion& a, const ExactExpansion& b);
    friend bool operator==(const ExactExpansion& a, const ExactExpansion& b) { return a.coeffs_ == b.coeffs_; }

    std::string to_string() const;

private:
    std::string var_;
    std::map<long, Rational> coeffs_;
};

long jet_dimension(int m, int l);
Rational jet_weight(int m, int l, const RationalVector& weights);

Rational futaki(const PolarizedData& d);

struct BlowupCoefficients {
    ExactExpansion a0, a1, b0, b1;
};
BlowupCoefficients blowup_coefficients(const PolarizedData& d, const BlowupPoint& p, int m);

// Shift the Hamiltonian by a constant so that b0 = 0. The blowup invariant is unchanged.
std::pair<PolarizedData, BlowupPoint> normalize_hamiltonian(const PolarizedData& d, const BlowupPoint& p);

class BlowupFutaki {
public:
    BlowupFutaki(const PolarizedData& d, const BlowupPoint& p, int m);

    Rational value(const Rational& eps) const;
    ExactExpansion series_to_order(long n) const;

    // Closed-form leading terms for a Futaki-neutral base with normalized Hamiltonian.
    ExactExpansion predicted_series() const;
    long predicted_order() const;

    enum class Regime { HigherDim, SurfaceGeneric, SurfaceA1Zero };
    Regime regime() const;

    const BlowupCoefficients& coefficients() const { return c_; }

private:
    PolarizedData d_;
    BlowupPoint p_;
    int m_;
    BlowupCoefficients c_;
};

PolarizedData projective_weight_data(int m, const std::vector<long>& action_weights);
// Data at the coordinate vertex e_vertex of P^m under the same action: the fibre of O(1) has
// weight w_vertex and the cotangent space sum_i (w_i - w_vertex).
BlowupPoint projective_vertex(const std::vector<long>& action_weights, int vertex);

nlohmann::json to_json(const ExactExpansion& e);
ExactExpansion expansion_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PolarizedData& d);
PolarizedData polarized_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BlowupPoint& p);
BlowupPoint point_from_json(const nlohmann::json& j);

}  // namespace kblow::futaki
