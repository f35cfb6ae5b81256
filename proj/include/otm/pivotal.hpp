#pragma once

// Gaussian online pivotal models (normalizing transformations) and the
// two-step pivotal test martingale that no natural test martingale dominates.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "otm/evidence.hpp"
#include "otm/special.hpp"

namespace otm {

enum class PivotalNormalizer {
    full_gaussian,  // (z_n - z_1) / (z_2 - z_1), N(z_1) = 0
    var1,           // z_n - z_1
    mean0,          // z_n / z_1
};

inline PivotalNormalizer parse_normalizer(std::string_view text)
{
    if (text == "full" || text == "full-gaussian") return PivotalNormalizer::full_gaussian;
    if (text == "var1") return PivotalNormalizer::var1;
    if (text == "mean0") return PivotalNormalizer::mean0;
    throw std::invalid_argument("unknown normalizer '" + std::string(text) + "'");
}

struct NormalizedSequence {
    std::vector<double> values;
    // x/0 with x != 0 is mapped to 0; counted here so callers can report it.
    std::size_t degenerate_divisions = 0;
};

namespace detail {
// 0/0 := 0, and x/0 := 0 as the total extension.
inline double safe_ratio(double num, double den, std::size_t& degenerate)
{
    if (den != 0.0) return num / den;
    if (num != 0.0) ++degenerate;
    return 0.0;
}
}  // namespace detail

inline NormalizedSequence normalize(PivotalNormalizer kind, const RealSequence& data)
{
    NormalizedSequence out;
    out.values.reserve(data.size());
    if (data.empty()) return out;
    const double first = data[0];
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double z = data[i];
        switch (kind) {
        case PivotalNormalizer::full_gaussian:
            out.values.push_back(i == 0 ? 0.0 : detail::safe_ratio(z - first, data[1] - first, out.degenerate_divisions));
            break;
        case PivotalNormalizer::var1:
            out.values.push_back(z - first);
            break;
        case PivotalNormalizer::mean0:
            out.values.push_back(detail::safe_ratio(z, first, out.degenerate_divisions));
            break;
        }
    }
    return out;
}

/// 1 / N(0,2)([-1,1]): the bet paid when z_2 - z_1 lands in [-1,1].
inline double pivotal_example_payoff()
{
    return 1.0 / centered_normal_mass(1.0, 2.0);
}

/// S_n = 1 for n <= 1; afterwards 1/N(0,2)([-1,1]) if z_2 - z_1 is in [-1,1]
/// and 0 otherwise. Returns S_0..S_N for N = data.size().
inline EvidencePath pivotal_example_path(const RealSequence& data)
{
    std::vector<double> path(data.size() + 1, 1.0);
    if (data.size() >= 2) {
        const double diff = normalize(PivotalNormalizer::var1, data).values[1];
        const double later = (diff >= -1.0 && diff <= 1.0) ? pivotal_example_payoff() : 0.0;
        for (std::size_t n = 2; n <= data.size(); ++n) path[n] = later;
    }
    return EvidencePath(std::move(path));
}

/// N(0,1)([-1,1]) / N(0,2)([-1,1]), about 1.3116: the expected value of
/// S_1^mu that any natural martingale dominating the example would need.
inline double nondomination_ratio()
{
    return centered_normal_mass(1.0, 1.0) / centered_normal_mass(1.0, 2.0);
}

}  // namespace otm
