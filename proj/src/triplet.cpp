#include "pdh/triplet.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "pdh/rng.hpp"

namespace pdh {

namespace {

void check_lengths(std::span<const double> a, std::span<const double> p, std::span<const double> n) {
    if (a.size() != p.size() || a.size() != n.size()) {
        throw DimensionError("triplet code lengths differ: " + std::to_string(a.size()) + ", " +
                             std::to_string(p.size()) + ", " + std::to_string(n.size()));
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
        throw ConfigError("weight decay must be non-negative");
    if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be positive");
}

TripletBatch sample_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed) {
    return sample_triplets_grouped(labels, {}, count, seed);
}

TripletBatch sample_triplets_grouped(std::span<const int> labels, std::span<const int> groups,
                                     std::size_t count, std::uint64_t seed) {
    if (!groups.empty() && groups.size() != labels.size()) {
        throw DimensionError("group list has " + std::to_string(groups.size()) + " entries for " +
                             std::to_string(labels.size()) + " labels");
    }
    auto group_of = [&](std::size_t i) { return groups.empty() ? 0 : groups[i]; };
    using Key = std::pair<int, int>;
    std::map<Key, std::vector<std::size_t>> members;
    std::map<int, std::set<int>> ids_in_group;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members[{group_of(i), labels[i]}].push_back(i);
        ids_in_group[group_of(i)].insert(labels[i]);
    }
    std::vector<std::size_t> eligible;
    bool two_ids = false;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool has_other = ids_in_group[group_of(i)].size() >= 2;
        two_ids = two_ids || has_other;
        if (has_other && members[{group_of(i), labels[i]}].size() >= 2) eligible.push_back(i);
    }
    if (!two_ids) {
        throw InfeasibleSampling("triplet sampling needs at least two distinct identities");
    }
    if (eligible.empty()) {
        throw InfeasibleSampling("no identity has two or more images; no positive pair exists");
    }

    std::map<Key, std::vector<std::size_t>> others;
    auto negatives_for = [&](std::size_t a) -> const std::vector<std::size_t>& {
        const Key key{group_of(a), labels[a]};
        auto it = others.find(key);
        if (it != others.end()) return it->second;
        std::vector<std::size_t> v;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (group_of(i) == key.first && labels[i] != key.second) v.push_back(i);
        }
        return others.emplace(key, std::move(v)).first->second;
    };

    Rng rng(seed);
    TripletBatch batch;
    batch.batch_seed = seed;
    batch.triplets.reserve(count);
    for (std::size_t t = 0; t < count; ++t) {
        const std::size_t a = eligible[rng.below(eligible.size())];
        const auto& same = members[{group_of(a), labels[a]}];
        // Uniform over the group minus the anchor itself.
        std::size_t p = same[rng.below(same.size() - 1)];
        if (p == a) p = same.back();
        const auto& neg = negatives_for(a);
        const std::size_t n = neg[rng.below(neg.size())];
        batch.triplets.push_back({a, p, n});
    }
    return batch;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("distance between vectors of different length");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

double triplet_inner_term(std::span<const double> a, std::span<const double> p, std::span<const double> n) {
    check_lengths(a, p, n);
    return squared_distance(a, n) - squared_distance(a, p);
}

double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                    double margin) {
    return std::max(0.0, margin - triplet_inner_term(a, p, n));
}

TripletGrads triplet_loss_grads(std::span<const double> a, std::span<const double> p,
                                std::span<const double> n, double margin) {
    const std::size_t q = a.size();
    TripletGrads g{std::vector<double>(q, 0.0), std::vector<double>(q, 0.0), std::vector<double>(q, 0.0)};
    if (margin - triplet_inner_term(a, p, n) <= 0.0) return g;
    for (std::size_t i = 0; i < q; ++i) {
        g.anchor[i] = 2.0 * (n[i] - p[i]);
        g.positive[i] = 2.0 * (p[i] - a[i]);
        g.negative[i] = 2.0 * (a[i] - n[i]);
    }
    return g;
}

TrainResult train_hashnet(HashNet net, const LabeledSet& data, const TrainConfig& config) {
    config.validate();
    if (data.samples.rows() != data.labels.size()) {
        throw DimensionError("training set has " + std::to_string(data.samples.rows()) + " samples but " +
                             std::to_string(data.labels.size()) + " labels");
    }
    TrainResult result{std::move(net), {}};
    HashNet& model = result.net;
    const std::size_t per_epoch = config.triplets_per_epoch ? config.triplets_per_epoch : data.labels.size();
    const std::size_t row = data.samples.row_size();
    const std::size_t q = model.hash_bits();

    std::vector<std::size_t> sample_dims = data.samples.shape;
    std::vector<long> slot_of(data.labels.size(), -1);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const TripletBatch drawn =
            sample_triplets_grouped(data.labels, data.groups, per_epoch,
                                    derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t active = 0;

        for (std::size_t start = 0; start < drawn.triplets.size(); start += config.batch_size) {
            const std::size_t end = std::min(drawn.triplets.size(), start + config.batch_size);
            const double scale = 1.0 / static_cast<double>(end - start);

            // Each distinct image in the batch is forwarded once.
            std::vector<std::size_t> unique;
            auto slot = [&](std::size_t idx) {
                if (slot_of[idx] < 0) {
                    slot_of[idx] = static_cast<long>(unique.size());
                    unique.push_back(idx);
                }
                return static_cast<std::size_t>(slot_of[idx]);
            };
            struct Slots { std::size_t a, p, n; };
            std::vector<Slots> slots;
            for (std::size_t t = start; t < end; ++t) {
                const Triplet& tr = drawn.triplets[t];
                slots.push_back({slot(tr.anchor), slot(tr.positive), slot(tr.negative)});
            }

            sample_dims[0] = unique.size();
            Tensor batch(sample_dims);
            for (std::size_t u = 0; u < unique.size(); ++u) {
                const auto src = data.samples.row(unique[u]);
                std::copy(src.begin(), src.end(), batch.data.begin() + static_cast<std::ptrdiff_t>(u * row));
            }
            for (std::size_t idx : unique) slot_of[idx] = -1;

            const ForwardTrace trace = forward_train(model, batch);
            const Tensor& codes = trace.output();
            Tensor out_grad({unique.size(), q});
            for (const Slots& s : slots) {
                const auto a = codes.row(s.a), p = codes.row(s.p), n = codes.row(s.n);
                const double loss = triplet_loss(a, p, n, config.margin);
                if (!std::isfinite(loss)) {
                    throw TrainingDivergence("non-finite triplet loss in epoch " + std::to_string(epoch + 1),
                                             epoch + 1);
                }
                loss_sum += loss;
                if (loss > 0.0) ++active;
                const TripletGrads g = triplet_loss_grads(a, p, n, config.margin);
                auto ga = out_grad.row(s.a), gp = out_grad.row(s.p), gn = out_grad.row(s.n);
                for (std::size_t i = 0; i < q; ++i) {
                    ga[i] += scale * g.anchor[i];
                    gp[i] += scale * g.positive[i];
                    gn[i] += scale * g.negative[i];
                }
            }
            const ParameterGradients grads = backward(model, trace, out_grad);
            try {
                sgd_step(model, grads, config.lr, config.weight_decay);
            } catch (const TrainingDivergence&) {
                throw TrainingDivergence("non-finite gradient in epoch " + std::to_string(epoch + 1), epoch + 1);
            }
        }
        const double denom = static_cast<double>(drawn.triplets.size());
        result.history.push_back({loss_sum / denom, static_cast<double>(active) / denom});
    }
    return result;
}

void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history) {
    out << "epoch,mean_loss,active_fraction\n";
    char buf[96];
    for (std::size_t e = 0; e < history.size(); ++e) {
        std::snprintf(buf, sizeof buf, "%zu,%.10f,%.6f\n", e + 1, history[e].mean_loss,
                      history[e].active_fraction);
        out << buf;
    }
}

}  // namespace pdh
