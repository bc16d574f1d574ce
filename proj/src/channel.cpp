#include "idsim/channel.hpp"

#include <cmath>

#include "idsim/csv.hpp"

namespace idsim {

double gmac_step(std::span<const double> inputs, double noise) {
    double sum = noise;
    for (double v : inputs) {
        if (!std::isfinite(v)) throw std::invalid_argument("gmac_step: non-finite input");
        sum += v;
    }
    if (!std::isfinite(noise)) throw std::invalid_argument("gmac_step: non-finite noise");
    return sum;
}

double sd_gmac_step(std::span<const double> inputs, std::span<const double> state, double noise) {
    if (inputs.size() != state.size())
        throw std::invalid_argument("sd_gmac_step: input/state dimension mismatch");
    double sum = gmac_step(inputs, noise);
    for (double v : state) sum += v;
    return sum;
}

Transcript run_feedback_session(std::span<const Encoder> encoders, int m, const ChannelParams& params,
                                const std::optional<StateParams>& state, RngStream& rng) {
    const int K = params.K;
    if (static_cast<int>(encoders.size()) != K)
        throw std::invalid_argument("run_feedback_session: encoder count != K");
    if (m <= 0) throw std::invalid_argument("run_feedback_session: m must be positive");
    if (state && (static_cast<int>(state->mu.size()) != K || state->sigma.dim != K))
        throw std::invalid_argument("run_feedback_session: state dimension mismatch");

    Transcript tr;
    tr.senders = K;
    tr.length = m;
    tr.has_state = state.has_value();
    tr.x.assign(static_cast<std::size_t>(K) * m, 0.0);
    if (tr.has_state) tr.s.assign(static_cast<std::size_t>(K) * m, 0.0);
    tr.y.assign(m, 0.0);

    std::vector<double> chol;
    std::vector<double> svec(K), z(K), xt(K);
    if (state) chol = cholesky_lower(state->sigma);
    const double sigma = std::sqrt(params.sigma2);

    for (int t = 1; t <= m; ++t) {
        const std::span<const double> prefix(tr.y.data(), static_cast<std::size_t>(t - 1));
        for (int k = 0; k < K; ++k) {
            const double v = encoders[k](t, prefix);
            if (!std::isfinite(v)) throw SessionAbort(k + 1, t);
            xt[k] = v;
            tr.x[static_cast<std::size_t>(k) * m + (t - 1)] = v;
        }
        double out;
        if (state) {
            sample_mvn_chol(state->mu, chol, rng, svec, z);
            for (int k = 0; k < K; ++k) tr.s[static_cast<std::size_t>(k) * m + (t - 1)] = svec[k];
            out = sd_gmac_step(xt, svec, sigma * sample_std_normal(rng));
        } else {
            out = gmac_step(xt, sigma * sample_std_normal(rng));
        }
        tr.y[t - 1] = out;
    }
    return tr;
}

PowerReport check_power(std::span<const double> codeword, const PowerConstraint& constraint) {
    PowerReport rep;
    for (std::size_t i = 0; i < codeword.size(); ++i) {
        const double v = codeword[i];
        rep.sum_sq += v * v;
        const double mag = std::abs(v);
        if (mag > rep.peak_amplitude) rep.peak_amplitude = mag;
        if (constraint.p_peak && mag > *constraint.p_peak && rep.violating_index < 0)
            rep.violating_index = static_cast<int>(i);
    }
    const double budget = static_cast<double>(codeword.size()) * constraint.p_total;
    rep.average_ok = rep.sum_sq <= budget + 1e-9;
    rep.peak_ok = !constraint.p_peak || rep.peak_amplitude <= *constraint.p_peak;
    rep.pass = rep.average_ok && rep.peak_ok;
    return rep;
}

void write_transcript_csv(std::ostream& os, const Transcript& tr) {
    os << "t,y";
    for (int k = 1; k <= tr.senders; ++k) os << ",x_" << k;
    if (tr.has_state)
        for (int k = 1; k <= tr.senders; ++k) os << ",s_" << k;
    os << "\n";
    for (int t = 0; t < tr.length; ++t) {
        os << (t + 1) << ',' << csv_num(tr.y[t]);
        for (int k = 0; k < tr.senders; ++k) os << ',' << csv_num(tr.input(k, t));
        if (tr.has_state)
            for (int k = 0; k < tr.senders; ++k) os << ',' << csv_num(tr.state(k, t));
        os << "\n";
    }
}

} // namespace idsim
