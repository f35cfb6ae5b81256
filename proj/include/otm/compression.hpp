#pragma once

// Online compression models and the conformal p-values they generate.
//
// A model supplies a summary type (with an empty summary), a forward function
// absorbing one observation, and the randomized p-value of the newest
// observation computed from the one-step backward kernel of the summary that
// includes it. The conformity measure is the identity A(sigma, z) = z.
//
// Two models are provided:
//   BinaryExchangeabilityModel  observations in {0,1}; summary (n, k) where k
//                               counts 1s; the backward kernel draws the last
//                               observation as 1 with probability k/n.
//   GaussianVar1Model           real observations; summary (n, sum); given the
//                               sum, the last observation is
//                               Normal(sum/n, (n-1)/n) under the density
//                               proportional to exp(-sum z_i^2 / 2).

#include <cmath>
#include <concepts>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "otm/evidence.hpp"
#include "otm/random.hpp"
#include "otm/special.hpp"

namespace otm {

class PValue {
public:
    explicit PValue(double value) : value_(value)
    {
        if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("p-value must lie in [0,1]");
    }
    double value() const noexcept { return value_; }
    operator double() const noexcept { return value_; }

private:
    double value_;
};

namespace detail {
inline void check_tau(double tau)
{
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0,1]");
}
}  // namespace detail

struct ExchangeabilitySummary {
    int n = 0;
    int k = 0;
    friend bool operator==(const ExchangeabilitySummary&, const ExchangeabilitySummary&) = default;
};

struct GaussianVar1Summary {
    int n = 0;
    double sum = 0.0;
};

inline ExchangeabilitySummary exch_forward(ExchangeabilitySummary summary, int z)
{
    if (z != 0 && z != 1) throw std::invalid_argument("binary observation must be 0 or 1");
    return {summary.n + 1, summary.k + z};
}

/// Conformal p-value of z_n given the summary of the n - 1 earlier observations.
inline PValue exch_p_value(ExchangeabilitySummary prev, int z, double tau)
{
    detail::check_tau(tau);
    const auto [n, k] = exch_forward(prev, z);
    const double ones = static_cast<double>(k) / n;
    const double zeros = static_cast<double>(n - k) / n;
    if (z == 1) return PValue(std::min(1.0, zeros + tau * ones));
    return PValue(tau * zeros);
}

inline GaussianVar1Summary gauss_var1_forward(GaussianVar1Summary summary, double z)
{
    if (!std::isfinite(z)) throw std::invalid_argument("real observations must be finite");
    return {summary.n + 1, summary.sum + z};
}

/// Conformal p-value of z_n in the variance-1 Gaussian model. The first
/// p-value is tau; from n = 2 on ties have probability zero and tau is unused.
inline PValue gauss_var1_p_value(GaussianVar1Summary prev, double z, double tau)
{
    detail::check_tau(tau);
    const auto [n, sum] = gauss_var1_forward(prev, z);
    if (n == 1) return PValue(tau);
    const double nd = static_cast<double>(n);
    return PValue(normal_cdf((z - sum / nd) / std::sqrt((nd - 1.0) / nd)));
}

inline PValue gauss_var1_p_value(const RealSequence& prefix, double z, double tau)
{
    GaussianVar1Summary summary;
    for (double v : prefix.values()) summary = gauss_var1_forward(summary, v);
    return gauss_var1_p_value(summary, z, tau);
}

struct BinaryExchangeabilityModel {
    using Summary = ExchangeabilitySummary;
    using Observation = int;
    static constexpr std::string_view name = "binary-exchangeability";

    Summary empty_summary() const noexcept { return {}; }
    Summary forward(Summary s, Observation z) const { return exch_forward(s, z); }
    PValue p_value(Summary prev, Observation z, double tau) const { return exch_p_value(prev, z, tau); }
};

struct GaussianVar1Model {
    using Summary = GaussianVar1Summary;
    using Observation = double;
    static constexpr std::string_view name = "gaussian-var1";

    Summary empty_summary() const noexcept { return {}; }
    Summary forward(Summary s, Observation z) const { return gauss_var1_forward(s, z); }
    PValue p_value(Summary prev, Observation z, double tau) const { return gauss_var1_p_value(prev, z, tau); }
};

template <class M>
concept OnlineCompressionModel = requires(const M& model, typename M::Summary summary,
                                          typename M::Observation z, double tau) {
    { model.empty_summary() } -> std::same_as<typename M::Summary>;
    { model.forward(summary, z) } -> std::same_as<typename M::Summary>;
    { model.p_value(summary, z, tau) } -> std::same_as<PValue>;
};

static_assert(OnlineCompressionModel<BinaryExchangeabilityModel>);
static_assert(OnlineCompressionModel<GaussianVar1Model>);

/// Sequential conformal p-values, one tau draw per observation.
template <OnlineCompressionModel Model, class Range>
std::vector<PValue> conformal_p_values(const Model& model, const Range& observations, RandomizationStream& taus)
{
    std::vector<PValue> out;
    out.reserve(std::size(observations));
    auto summary = model.empty_summary();
    for (const auto& z : observations) {
        const auto obs = static_cast<typename Model::Observation>(z);
        out.push_back(model.p_value(summary, obs, taus.uniform()));
        summary = model.forward(summary, obs);
    }
    return out;
}

enum class CompressionModelKind { binary_exchangeability, gaussian_var1 };

inline CompressionModelKind parse_compression_model(std::string_view text)
{
    if (text == BinaryExchangeabilityModel::name || text == "exch") return CompressionModelKind::binary_exchangeability;
    if (text == GaussianVar1Model::name || text == "gauss-var1") return CompressionModelKind::gaussian_var1;
    throw std::invalid_argument("unknown compression model '" + std::string(text) + "'");
}

using Observations = std::variant<BinarySequence, RealSequence>;

inline std::vector<PValue> conformal_p_sequence(const Observations& data, RandomizationStream& taus,
                                                CompressionModelKind model)
{
    if (model == CompressionModelKind::binary_exchangeability) {
        const auto* binary = std::get_if<BinarySequence>(&data);
        if (!binary) throw std::invalid_argument("binary-exchangeability model requires binary observations");
        return conformal_p_values(BinaryExchangeabilityModel{}, binary->values(), taus);
    }
    const auto* real = std::get_if<RealSequence>(&data);
    if (!real) throw std::invalid_argument("gaussian-var1 model requires real observations");
    return conformal_p_values(GaussianVar1Model{}, real->values(), taus);
}

}  // namespace otm
