#pragma once

#include "kblow/rational.hpp"

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"

namespace kblow::git {

// Torus-restricted Hilbert-Mumford data: w_L(lambda) = max_i l_i(lambda), w_K likewise.
struct WeightSystem {
    int rank = 0;
    std::vector<RationalVector> L;
    std::vector<RationalVector> K;
    std::vector<RationalVector> stabilizer;  // spanning set, may be empty

    void validate() const;
};

struct ConeDescription {
    std::vector<RationalVector> rays;
    std::vector<RationalVector> facet_normals;
};

struct Verdict {
    bool value = false;
    std::optional<RationalVector> witness;
};

// Generators of {x : a.x <= 0 for every row a}. Lines are listed once; rays are orthogonal to them.
struct ConeGenerators {
    std::vector<RationalVector> lines;
    std::vector<RationalVector> rays;
};
ConeGenerators cone_generators(const std::vector<RationalVector>& rows, int dim);

RationalVector primitive(const RationalVector& v);
bool in_span(const std::vector<RationalVector>& basis, const RationalVector& v);

Rational weight_L(const WeightSystem& ws, const RationalVector& lambda);
Rational weight_K(const WeightSystem& ws, const RationalVector& lambda);

Verdict is_semistable(const WeightSystem& ws);
// {lambda : l_i(lambda) <= 0}; equals {w_L = 0} exactly when the point is semistable.
ConeDescription zero_cone(const WeightSystem& ws, bool require_semistable = true);

// Second half of the perturbed criterion on its own: {l_i <= 0, m_j <= 0} lies in the stabilizer.
Verdict perturbation_positive_on_cone(const WeightSystem& ws);
Verdict is_polystable_perturbed(const WeightSystem& ws);

struct EpsilonBound {
    Rational bound;
    double delta = 0;
    double C = 0;
    bool unbounded = false;  // w_K > 0 on every sampled direction
    bool approximate = true;
    std::size_t samples = 0;
};
EpsilonBound epsilon0_bound(const WeightSystem& ws, std::size_t sphere_samples, std::uint64_t seed = 1);

struct SweepEntry {
    Rational eps;
    Rational min_value;         // min over sampled rays of (w_L + eps w_K)(v) / |v|_inf
    RationalVector argmin;
    bool nonpositive_off_stabilizer = false;
    std::size_t rays_used = 0;
};
std::vector<SweepEntry> sweep_stability(const WeightSystem& ws, const std::vector<Rational>& eps_list,
                                        std::size_t ray_samples, int jobs = 1);

// Deterministic ray set: every primitive integer vector in a box, then seeded rational directions.
std::vector<std::vector<std::int64_t>> sample_rays(int rank, std::size_t count, std::uint64_t seed = 12345);

// K -> cL + K, i.e. K_functionals become {c l_i + m_j}; the matching parameter is eps / (1 - eps c).
WeightSystem shift_polarization(const WeightSystem& ws, const Rational& c);
Rational shifted_epsilon(const Rational& eps, const Rational& c);

nlohmann::json to_json(const WeightSystem& ws);
WeightSystem weight_system_from_json(const nlohmann::json& j);
nlohmann::json vector_json(const RationalVector& v);

}  // namespace kblow::git
