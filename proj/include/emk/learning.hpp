#pragma once

#include "emk/aggregation.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace emk {

// Margin hinge on a triplet of unit-norm descriptors:
// [1 + ||a-p|| - ||a-n||]_+. Inputs whose norm deviates from 1 by more than
// 1e-6 are rejected.
double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative);

struct TripletGrad {
    double loss = 0.0;
    std::vector<double> d_anchor;
    std::vector<double> d_positive;
    std::vector<double> d_negative;
};

// Loss and its gradients w.r.t. the three (normalized) inputs. The hinge
// subgradient at the kink is taken from the inactive side (zero).
TripletGrad triplet_loss_backward(std::span<const double> anchor,
                                  std::span<const double> positive,
                                  std::span<const double> negative);

struct TripletSelection {
    std::vector<int> negative_index; // per anchor, index into positives
    std::vector<double> loss;        // per-anchor margin loss of the formed triplet
};

// For each anchor, the positive of another pair with the smallest Euclidean
// distance; ties resolve to the smallest index.
TripletSelection mine_hardest(const std::vector<std::vector<double>>& anchors,
                              const std::vector<std::vector<double>>& positives);

// Gradient of the l2 normalization: maps dL/d(normalized) to dL/d(raw).
std::vector<double> normalize_backward(const Descriptor& desc,
                                       std::span<const double> grad_normalized);

struct HeadGradients {
    std::vector<double> projection; // D x E
    std::vector<double> offset;     // D
    std::vector<double> phi;        // n^2 x d
    std::vector<double> phi_tilde;  // n^2 x d; only for combined with a separate tensor
};

// Backward pass of describe_spatial_* given dL/d(raw descriptor):
// dM = upstream (x) vec(Phi^T F), dm = n^2 upstream, dPhi = F (M^T upstream
// reshaped)^T. When the combined variant shares one tensor, both block
// contributions fold into phi.
HeadGradients head_gradients(const DescriptorHead& head, const SpatialContext& ctx,
                             const FeatureTensor& phi, const FeatureTensor* phi_tilde,
                             std::span<const double> upstream_raw);

struct SgdState {
    std::vector<double> velocity;
};

// Momentum SGD: v <- mu v + (g + wd p); p <- p - lr v.
void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr,
              double momentum, double weight_decay, SgdState& state);

// Linear decay from lr0 to zero across total_epochs.
double linear_lr(double lr0, int epoch, int total_epochs);

struct ToyDataset {
    std::vector<FeatureTensor> tensors;
    std::vector<int> labels;
};

struct ToyTrainConfig {
    int epochs = 10;
    double lr0 = 0.5;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    int pairs_per_batch = 32;
    int out_dim = 16;
    std::uint64_t seed = 1;
};

struct TraceRow {
    int epoch = 0;
    int step = 0;
    double mean_loss = 0.0;
    double lr = 0.0;
};

struct ToyTrainResult {
    DescriptorHead head;
    std::vector<TraceRow> trace;
};

// Desk-scale training of (M, m) with hardest-in-batch mining. Batches are
// anchor-positive pairs drawn per class; deterministic for a given seed.
ToyTrainResult train_head_toy(const ToyDataset& dataset, const SpatialContext& ctx,
                              const ToyTrainConfig& config);

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace);

} // namespace emk
