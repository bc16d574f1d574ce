#include "idsim/crgen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "idsim/csv.hpp"
#include "idsim/gaussmath.hpp"

namespace idsim {

std::pair<double, double> derive_output_stats(const ChannelParams& params,
                                              const std::optional<StateParams>& state) {
    if (!state) return {0.0, std::sqrt(params.sigma2)};
    double mean = 0.0;
    for (double m : state->mu) mean += m;
    double var = params.sigma2;
    for (int i = 0; i < state->sigma.dim; ++i)
        for (int j = 0; j < state->sigma.dim; ++j) var += state->sigma(i, j);
    return {mean, std::sqrt(var)};
}

std::vector<double> bin_boundaries(const QuantizerConfig& config) {
    if (config.L < 2) throw std::invalid_argument("bin_boundaries: L must be at least 2");
    if (!(config.sigma_y > 0.0)) throw std::invalid_argument("bin_boundaries: sigma_y must be positive");
    std::vector<double> b(static_cast<std::size_t>(config.L) + 1);
    b.front() = -std::numeric_limits<double>::infinity();
    b.back() = std::numeric_limits<double>::infinity();
    for (std::int64_t l = 1; l < config.L; ++l)
        b[l] = config.mu_y +
               config.sigma_y * std_normal_quantile(static_cast<double>(l) / static_cast<double>(config.L));
    return b;
}

Quantizer::Quantizer(QuantizerConfig config)
    : config_(config), boundaries_(bin_boundaries(config)) {}

std::int64_t Quantizer::operator()(double y) const {
    if (!std::isfinite(y)) throw std::invalid_argument("quantize: non-finite input");
    // Smallest l with y <= b_l; equality lands in the lower bin because b_l is
    // the right edge of bin l.
    const auto it = std::lower_bound(boundaries_.begin() + 1, boundaries_.end() - 1, y);
    return static_cast<std::int64_t>(it - boundaries_.begin());
}

void write_boundaries_csv(std::ostream& os, const Quantizer& q) {
    os << "l,boundary\n";
    const auto b = q.boundaries();
    for (std::size_t l = 0; l < b.size(); ++l) os << l << ',' << csv_num(b[l]) << "\n";
}

} // namespace idsim
