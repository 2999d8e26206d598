#pragma once

// End-to-end gradient check of network + triplet loss against central finite
// differences. Shared by the unit tests and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "oracles.hpp"
#include "pdh/netcore.hpp"
#include "pdh/rng.hpp"
#include "pdh/triplet.hpp"

namespace gradcheck {

struct Result {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // perturbation crossed a relu or pooling decision
    std::size_t parameters = 0;
    double loss = 0.0;
};

// Relative error with the denominator floored at 1e-4, so gradients below
// that scale are judged on absolute error instead.
inline double rel_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4}); }

// One of five layer-stack families, sized to stay at or below max_params.
inline std::vector<pdh::LayerSpec> random_stack(pdh::Rng& rng, int family, std::size_t max_params = 500) {
    for (;;) {
        auto pick = [&](std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); };
        std::vector<pdh::LayerSpec> layers;
        switch (family % 5) {
            case 0:
                layers = pdh::ArchitectureBuilder({pick(1, 3), pick(2, 4), pick(2, 4)})
                             .fully_connected(pick(3, 8))
                             .relu()
                             .hash_head(pick(2, 6));
                break;
            case 1:
                layers = pdh::ArchitectureBuilder({pick(1, 2), pick(5, 7), pick(5, 7)})
                             .conv(pick(2, 3), pick(2, 3))
                             .relu()
                             .max_pool(2)
                             .fully_connected(pick(3, 5))
                             .relu()
                             .hash_head(pick(2, 4));
                break;
            case 2:
                layers = pdh::ArchitectureBuilder({2, pick(4, 6), pick(4, 6)})
                             .max_pool(2)
                             .fully_connected(pick(3, 6))
                             .relu()
                             .hash_head(pick(2, 5));
                break;
            case 3:
                layers = pdh::ArchitectureBuilder({pick(1, 3), pick(5, 8), pick(5, 8)})
                             .conv(pick(2, 4), 3, 2)
                             .relu()
                             .hash_head(pick(2, 5));
                break;
            default:
                layers = pdh::ArchitectureBuilder({pick(2, 6), 1, 1}).hash_head(pick(2, 8));
                break;
        }
        std::size_t n = 0;
        for (const auto& l : layers) n += l.parameter_count();
        if (n <= max_params) return layers;
    }
}

// Loss of triplet (a, p, n) through the scalar oracle forward pass.
inline double oracle_loss(const pdh::HashNet& net, const std::vector<std::vector<double>>& x,
                          oracle::Pattern* pattern = nullptr) {
    const auto fa = oracle::forward_sample(net, x[0], pattern);
    const auto fp = oracle::forward_sample(net, x[1], pattern);
    const auto fn = oracle::forward_sample(net, x[2], pattern);
    return pdh::triplet_loss(fa, fp, fn);
}

// Analytic gradient (library forward_train/backward/triplet_loss_grads) vs a
// central difference of the oracle loss with step h.
inline Result check(pdh::HashNet net, const std::vector<std::vector<double>>& x, double h = 1e-5) {
    const pdh::Shape3 in = net.input_shape();
    pdh::Tensor batch({3, in.channels, in.height, in.width});
    for (std::size_t r = 0; r < 3; ++r) std::copy(x[r].begin(), x[r].end(), batch.row(r).begin());

    const pdh::ForwardTrace trace = pdh::forward_train(net, batch);
    const pdh::Tensor& out = trace.output();
    const auto g = pdh::triplet_loss_grads(out.row(0), out.row(1), out.row(2));
    pdh::Tensor og({3, net.hash_bits()});
    std::copy(g.anchor.begin(), g.anchor.end(), og.row(0).begin());
    std::copy(g.positive.begin(), g.positive.end(), og.row(1).begin());
    std::copy(g.negative.begin(), g.negative.end(), og.row(2).begin());
    const pdh::ParameterGradients analytic = pdh::backward(net, trace, og);

    Result res;
    oracle::Pattern base;
    res.loss = oracle_loss(net, x, &base);
    for (std::size_t t = 0; t < analytic.size(); ++t) {
        for (std::size_t i = 0; i < analytic[t].size(); ++i) {
            ++res.parameters;
            const double p0 = net.parameters()[t].data[i];
            oracle::Pattern up_pat, dn_pat;
            net.mutable_parameters()[t].data[i] = p0 + h;
            const double up = oracle_loss(net, x, &up_pat);
            net.mutable_parameters()[t].data[i] = p0 - h;
            const double dn = oracle_loss(net, x, &dn_pat);
            net.mutable_parameters()[t].data[i] = p0;
            if (!(up_pat == base) || !(dn_pat == base)) {
                ++res.skipped;
                continue;
            }
            const double fd = (up - dn) / (2 * h);
            res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic[t].data[i], fd));
            ++res.checked;
        }
    }
    return res;
}

// Random configuration `index`: family index % 5, net seed and inputs derived
// from `seed`. Retries until the hinge is active.
inline Result random_case(std::uint64_t seed, int index) {
    pdh::Rng rng(pdh::derive_seed(seed, static_cast<std::uint64_t>(index)));
    for (;;) {
        const auto layers = random_stack(rng, index);
        pdh::HashNet net(layers, rng.next_u64());
        // Random biases too, so bias gradients are not evaluated only at zero.
        for (auto& t : net.mutable_parameters()) {
            for (double& v : t.data) v += 0.1 * rng.uniform(-1.0, 1.0);
        }
        const std::size_t n = net.input_shape().volume();
        std::vector<std::vector<double>> x(3, std::vector<double>(n));
        for (auto& s : x)
            for (double& v : s) v = rng.uniform();
        if (oracle_loss(net, x) > 0.05) return check(std::move(net), x);
    }
}

}  // namespace gradcheck
