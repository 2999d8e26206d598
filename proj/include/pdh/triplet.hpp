#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pdh/netcore.hpp"

namespace pdh {

struct Triplet {
    std::size_t anchor = 0;
    std::size_t positive = 0;
    std::size_t negative = 0;

    friend bool operator==(const Triplet&, const Triplet&) = default;
};

struct TripletBatch {
    std::vector<Triplet> triplets;
    int epoch = 0;
    std::uint64_t batch_seed = 0;
};

struct LossReport {
    double mean_loss = 0.0;
    double active_fraction = 0.0;
};

struct TrainConfig {
    double lr = 0.05;
    std::size_t batch_size = 32;  // triplets per SGD step
    int epochs = 30;
    double weight_decay = 1e-4;
    std::uint64_t seed = 42;  // triplet sampling stream
    // Triplets drawn per epoch; 0 means one per training sample.
    std::size_t triplets_per_epoch = 0;
    double margin = 1.0;

    void validate() const;
};

// Samples of one training subset: rows of `samples` are network inputs,
// labels[i] is the identity of row i.
struct LabeledSet {
    Tensor samples;
    std::vector<int> labels;
    // Optional sampling groups: when non-empty, a triplet never mixes rows of
    // different groups.
    std::vector<int> groups;
};

// Draws `count` triplets: anchor uniform over images whose identity has at
// least two images, positive uniform over the anchor's other images, negative
// uniform over images of any other identity.
TripletBatch sample_triplets(std::span<const int> labels, std::size_t count, std::uint64_t seed);

// As sample_triplets, with all three members drawn from the anchor's group.
// An empty `groups` puts every row in one group.
TripletBatch sample_triplets_grouped(std::span<const int> labels, std::span<const int> groups,
                                     std::size_t count, std::uint64_t seed);

double squared_distance(std::span<const double> a, std::span<const double> b);

// D(a,n) - D(a,p) with D the squared Euclidean distance.
double triplet_inner_term(std::span<const double> a, std::span<const double> p,
                          std::span<const double> n);

// max(0, margin - (D(a,n) - D(a,p))).
double triplet_loss(std::span<const double> a, std::span<const double> p, std::span<const double> n,
                    double margin = 1.0);

struct TripletGrads {
    std::vector<double> anchor;
    std::vector<double> positive;
    std::vector<double> negative;
};

// Gradients of triplet_loss. Zero when the hinge argument is <= 0; otherwise
// d/da = 2(n - p), d/dp = 2(p - a), d/dn = 2(a - n).
TripletGrads triplet_loss_grads(std::span<const double> a, std::span<const double> p,
                                std::span<const double> n, double margin = 1.0);

struct TrainResult {
    HashNet net;
    std::vector<LossReport> history;  // one entry per epoch
};

// Mini-batch SGD on the mean triplet loss of each batch. History records the
// mean loss and active fraction of the triplets seen during each epoch, measured
// before the step that consumed them.
TrainResult train_hashnet(HashNet net, const LabeledSet& data, const TrainConfig& config);

// Loss history as CSV with header "epoch,mean_loss,active_fraction"; epochs count from 1.
void write_loss_csv(std::ostream& out, const std::vector<LossReport>& history);

}  // namespace pdh
