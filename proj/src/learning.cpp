#include "emk/learning.hpp"

#include "emk/backend.hpp"
#include "emk/error.hpp"
#include "emk/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace emk {

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return std::sqrt(acc);
}

void check_unit_norm(std::span<const double> v, const char* what) {
    const double norm = std::sqrt(kern::sum_sq(v.data(), v.size()));
    if (std::abs(norm - 1.0) > 1e-6)
        throw std::invalid_argument(std::string(what) + " descriptor is not unit-norm");
}

} // namespace

double triplet_loss(std::span<const double> anchor, std::span<const double> positive,
                    std::span<const double> negative) {
    if (anchor.size() != positive.size() || anchor.size() != negative.size())
        throw std::invalid_argument("triplet_loss: dimension mismatch");
    check_unit_norm(anchor, "anchor");
    check_unit_norm(positive, "positive");
    check_unit_norm(negative, "negative");
    const double margin = 1.0 + euclidean(anchor, positive) - euclidean(anchor, negative);
    return std::max(margin, 0.0);
}

TripletGrad triplet_loss_backward(std::span<const double> anchor,
                                  std::span<const double> positive,
                                  std::span<const double> negative) {
    const std::size_t dim = anchor.size();
    TripletGrad grad;
    grad.d_anchor.assign(dim, 0.0);
    grad.d_positive.assign(dim, 0.0);
    grad.d_negative.assign(dim, 0.0);
    grad.loss = triplet_loss(anchor, positive, negative);
    if (grad.loss <= 0.0)
        return grad;

    const double dist_ap = euclidean(anchor, positive);
    const double dist_an = euclidean(anchor, negative);
    // d||a-x||/da = (a-x)/||a-x||; zero-distance pairs have no usable
    // direction, contribute nothing.
    if (dist_ap > 0.0) {
        const double inv = 1.0 / dist_ap;
        for (std::size_t i = 0; i < dim; ++i) {
            const double g = (anchor[i] - positive[i]) * inv;
            grad.d_anchor[i] += g;
            grad.d_positive[i] -= g;
        }
    }
    if (dist_an > 0.0) {
        const double inv = 1.0 / dist_an;
        for (std::size_t i = 0; i < dim; ++i) {
            const double g = (anchor[i] - negative[i]) * inv;
            grad.d_anchor[i] -= g;
            grad.d_negative[i] += g;
        }
    }
    return grad;
}

TripletSelection mine_hardest(const std::vector<std::vector<double>>& anchors,
                              const std::vector<std::vector<double>>& positives) {
    const std::size_t batch = anchors.size();
    if (batch < 2)
        throw std::invalid_argument("mine_hardest: batch must hold at least 2 pairs");
    if (positives.size() != batch)
        throw std::invalid_argument("mine_hardest: anchors and positives differ in length");

    TripletSelection selection;
    selection.negative_index.resize(batch);
    selection.loss.resize(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        int best = -1;
        double best_dist = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < batch; ++j) {
            if (j == i)
                continue;
            const double dist = euclidean(anchors[i], positives[j]);
            if (dist < best_dist) {
                best_dist = dist;
                best = static_cast<int>(j);
            }
        }
        selection.negative_index[i] = best;
        // Margin value of the formed triplet; mining itself puts no
        // normalization requirement on its inputs.
        const double margin = 1.0 + euclidean(anchors[i], positives[i]) - best_dist;
        selection.loss[i] = std::max(margin, 0.0);
    }
    return selection;
}

std::vector<double> normalize_backward(const Descriptor& desc,
                                       std::span<const double> grad_normalized) {
    if (grad_normalized.size() != desc.normalized.size())
        throw std::invalid_argument("normalize_backward: dimension mismatch");
    const double along = kern::dot(desc.normalized.data(), grad_normalized.data(),
                                   grad_normalized.size());
    std::vector<double> grad_raw(grad_normalized.size());
    for (std::size_t i = 0; i < grad_raw.size(); ++i)
        grad_raw[i] = desc.gamma * (grad_normalized[i] - desc.normalized[i] * along);
    return grad_raw;
}

namespace {

struct SpatialPieces {
    const PositionTable* first = nullptr;
    const PositionTable* second = nullptr;
    const FeatureTensor* phi = nullptr;
    const FeatureTensor* phi_second = nullptr;
    int d = 0;
    int e = 0;
};

SpatialPieces resolve_pieces(const DescriptorHead& head, const SpatialContext& ctx,
                             const FeatureTensor& phi, const FeatureTensor* phi_tilde) {
    if (head.variant != ctx.config.variant)
        throw std::invalid_argument("head and context variants disagree");
    if (phi.n != ctx.geom.n)
        throw std::invalid_argument("tensor grid side disagrees with context");
    if (head.enc_dim != encoding_dim(head.variant, phi.d, ctx.config.s))
        throw std::invalid_argument("head encoding dimension disagrees with tensor channels");
    SpatialPieces pieces;
    pieces.phi = &phi;
    pieces.d = phi.d;
    const int dim = 2 * ctx.config.s + 1;
    pieces.e = dim * dim;
    switch (head.variant) {
    case Variant::xy:
        pieces.first = &ctx.cartesian;
        break;
    case Variant::rhotheta:
        pieces.first = &ctx.polar;
        break;
    case Variant::combined:
        pieces.first = &ctx.cartesian;
        pieces.second = &ctx.polar;
        pieces.phi_second = phi_tilde ? phi_tilde : &phi;
        break;
    }
    return pieces;
}

// dPhi[p][c] = sum_k V[c][k] F[p][k] for V = reshape of the relevant slice
// of M^T upstream.
void tensor_gradient(const double* v, const PositionTable& table, int d, int e, int n2,
                     double* out) {
    for (int p = 0; p < n2; ++p) {
        const double* row = table.row(p);
        double* dst = out + static_cast<std::size_t>(p) * d;
        for (int c = 0; c < d; ++c)
            dst[c] += kern::dot(v + static_cast<std::size_t>(c) * e, row, e);
    }
}

} // namespace

HeadGradients head_gradients(const DescriptorHead& head, const SpatialContext& ctx,
                             const FeatureTensor& phi, const FeatureTensor* phi_tilde,
                             std::span<const double> upstream_raw) {
    if (static_cast<int>(upstream_raw.size()) != head.out_dim)
        throw std::invalid_argument("head_gradients: upstream dimension disagrees with head");
    const auto pieces = resolve_pieces(head, ctx, phi, phi_tilde);
    const int n2 = phi.positions();

    // Recompute the aggregated encoding vec(Phi^T F).
    std::vector<double> acc(static_cast<std::size_t>(head.enc_dim), 0.0);
    for (int p = 0; p < n2; ++p)
        kern::outer_acc(1.0, pieces.phi->at(p), pieces.d, pieces.first->row(p), pieces.e,
                        acc.data());
    if (pieces.second) {
        double* half = acc.data() + static_cast<std::size_t>(pieces.d) * pieces.e;
        for (int p = 0; p < n2; ++p)
            kern::outer_acc(1.0, pieces.phi_second->at(p), pieces.d, pieces.second->row(p),
                            pieces.e, half);
    }

    HeadGradients grads;
    grads.projection.assign(static_cast<std::size_t>(head.out_dim) * head.enc_dim, 0.0);
    kern::outer_acc(1.0, upstream_raw.data(), head.out_dim, acc.data(), head.enc_dim,
                    grads.projection.data());

    grads.offset.assign(static_cast<std::size_t>(head.out_dim), 0.0);
    for (int t = 0; t < head.out_dim; ++t)
        grads.offset[t] = static_cast<double>(n2) * upstream_raw[t];

    // v = M^T upstream.
    std::vector<double> v(static_cast<std::size_t>(head.enc_dim), 0.0);
    for (int t = 0; t < head.out_dim; ++t)
        kern::axpy(upstream_raw[t],
                   head.projection.data() + static_cast<std::size_t>(t) * head.enc_dim, v.data(),
                   head.enc_dim);

    grads.phi.assign(static_cast<std::size_t>(n2) * pieces.d, 0.0);
    tensor_gradient(v.data(), *pieces.first, pieces.d, pieces.e, n2, grads.phi.data());
    if (pieces.second) {
        const double* v2 = v.data() + static_cast<std::size_t>(pieces.d) * pieces.e;
        if (phi_tilde) {
            grads.phi_tilde.assign(static_cast<std::size_t>(n2) * pieces.d, 0.0);
            tensor_gradient(v2, *pieces.second, pieces.d, pieces.e, n2, grads.phi_tilde.data());
        } else {
            tensor_gradient(v2, *pieces.second, pieces.d, pieces.e, n2, grads.phi.data());
        }
    }
    return grads;
}

void sgd_step(std::vector<double>& params, const std::vector<double>& grads, double lr,
              double momentum, double weight_decay, SgdState& state) {
    if (params.size() != grads.size())
        throw std::invalid_argument("sgd_step: parameter and gradient sizes disagree");
    if (state.velocity.empty())
        state.velocity.assign(params.size(), 0.0);
    if (state.velocity.size() != params.size())
        throw std::invalid_argument("sgd_step: state size disagrees with parameters");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + weight_decay * params[i];
        state.velocity[i] = momentum * state.velocity[i] + g;
        params[i] -= lr * state.velocity[i];
    }
}

double linear_lr(double lr0, int epoch, int total_epochs) {
    if (total_epochs < 1)
        throw std::invalid_argument("linear_lr: total_epochs must be >= 1");
    const double fraction = 1.0 - static_cast<double>(epoch) / total_epochs;
    return lr0 * std::max(fraction, 0.0);
}

ToyTrainResult train_head_toy(const ToyDataset& dataset, const SpatialContext& ctx,
                              const ToyTrainConfig& config) {
    if (dataset.tensors.size() != dataset.labels.size())
        throw std::invalid_argument("train_head_toy: tensors and labels differ in length");
    if (config.epochs < 1 || config.pairs_per_batch < 2)
        throw std::invalid_argument("train_head_toy: need >= 1 epoch and >= 2 pairs per batch");

    // Group sample indices per class; every class must support an
    // anchor-positive pair and mining needs at least two distinct classes.
    std::vector<int> class_ids;
    std::vector<std::vector<int>> members;
    for (std::size_t idx = 0; idx < dataset.tensors.size(); ++idx) {
        const int label = dataset.labels[idx];
        auto it = std::find(class_ids.begin(), class_ids.end(), label);
        if (it == class_ids.end()) {
            class_ids.push_back(label);
            members.push_back({static_cast<int>(idx)});
        } else {
            members[static_cast<std::size_t>(it - class_ids.begin())].push_back(
                static_cast<int>(idx));
        }
    }
    if (class_ids.size() < 2)
        throw std::invalid_argument("train_head_toy: need at least two distinct classes");
    for (const auto& m : members)
        if (m.size() < 2)
            throw std::invalid_argument("train_head_toy: every class needs >= 2 samples");

    const int d = dataset.tensors.front().d;
    for (const auto& t : dataset.tensors)
        if (t.n != ctx.geom.n || t.d != d)
            throw std::invalid_argument("train_head_toy: tensors must share shape");

    ToyTrainResult result;
    result.head = make_descriptor_head(ctx.config.variant, config.out_dim, d, ctx.config.s);
    result.head.projection =
        random_orthogonal(config.out_dim, result.head.enc_dim, config.seed);

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
    SgdState state_m;
    SgdState state_b;

    const std::size_t class_count = class_ids.size();
    std::vector<std::size_t> order(class_count);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = linear_lr(config.lr0, epoch, config.epochs);
        std::shuffle(order.begin(), order.end(), rng);
        int step = 0;
        for (std::size_t start = 0; start < class_count;
             start += static_cast<std::size_t>(config.pairs_per_batch)) {
            const std::size_t stop =
                std::min(class_count, start + static_cast<std::size_t>(config.pairs_per_batch));
            if (stop - start < 2)
                break;

            std::vector<Descriptor> anchors;
            std::vector<Descriptor> positives;
            std::vector<const FeatureTensor*> anchor_phis;
            std::vector<const FeatureTensor*> positive_phis;
            for (std::size_t c = start; c < stop; ++c) {
                const auto& m = members[order[c]];
                std::uniform_int_distribution<std::size_t> pick(0, m.size() - 1);
                const std::size_t ia = pick(rng);
                std::size_t ip = pick(rng);
                while (ip == ia)
                    ip = pick(rng);
                const FeatureTensor& ta = dataset.tensors[static_cast<std::size_t>(m[ia])];
                const FeatureTensor& tp = dataset.tensors[static_cast<std::size_t>(m[ip])];
                try {
                    Descriptor da = describe_spatial_efficient(result.head, ctx, ta);
                    Descriptor dp = describe_spatial_efficient(result.head, ctx, tp);
                    anchors.push_back(std::move(da));
                    positives.push_back(std::move(dp));
                    anchor_phis.push_back(&ta);
                    positive_phis.push_back(&tp);
                } catch (const numerical_error&) {
                    // Degenerate descriptor: drop the pair for this batch.
                }
            }
            const std::size_t batch = anchors.size();
            if (batch < 2)
                continue;

            std::vector<std::vector<double>> anchor_hat(batch);
            std::vector<std::vector<double>> positive_hat(batch);
            for (std::size_t i = 0; i < batch; ++i) {
                anchor_hat[i] = anchors[i].normalized;
                positive_hat[i] = positives[i].normalized;
            }
            const auto selection = mine_hardest(anchor_hat, positive_hat);

            std::vector<std::vector<double>> d_anchor_hat(
                batch, std::vector<double>(static_cast<std::size_t>(config.out_dim), 0.0));
            std::vector<std::vector<double>> d_positive_hat(
                batch, std::vector<double>(static_cast<std::size_t>(config.out_dim), 0.0));
            double loss_sum = 0.0;
            for (std::size_t i = 0; i < batch; ++i) {
                const auto neg = static_cast<std::size_t>(selection.negative_index[i]);
                const auto grad =
                    triplet_loss_backward(anchor_hat[i], positive_hat[i], positive_hat[neg]);
                loss_sum += grad.loss;
                for (int k = 0; k < config.out_dim; ++k) {
                    d_anchor_hat[i][k] += grad.d_anchor[k];
                    d_positive_hat[i][k] += grad.d_positive[k];
                    d_positive_hat[neg][k] += grad.d_negative[k];
                }
            }
            const double inv_batch = 1.0 / static_cast<double>(batch);

            std::vector<double> d_projection(result.head.projection.size(), 0.0);
            std::vector<double> d_offset(result.head.offset.size(), 0.0);
            auto accumulate = [&](const Descriptor& desc, const FeatureTensor& tensor,
                                  const std::vector<double>& d_hat) {
                std::vector<double> scaled(d_hat.size());
                for (std::size_t k = 0; k < d_hat.size(); ++k)
                    scaled[k] = d_hat[k] * inv_batch;
                const auto d_raw = normalize_backward(desc, scaled);
                const auto grads = head_gradients(result.head, ctx, tensor, nullptr, d_raw);
                for (std::size_t k = 0; k < d_projection.size(); ++k)
                    d_projection[k] += grads.projection[k];
                for (std::size_t k = 0; k < d_offset.size(); ++k)
                    d_offset[k] += grads.offset[k];
            };
            for (std::size_t i = 0; i < batch; ++i) {
                accumulate(anchors[i], *anchor_phis[i], d_anchor_hat[i]);
                accumulate(positives[i], *positive_phis[i], d_positive_hat[i]);
            }

            sgd_step(result.head.projection, d_projection, lr, config.momentum,
                     config.weight_decay, state_m);
            sgd_step(result.head.offset, d_offset, lr, config.momentum, config.weight_decay,
                     state_b);

            result.trace.push_back({epoch, step, loss_sum * inv_batch, lr});
            ++step;
        }
    }
    return result;
}

void write_loss_trace_csv(const std::filesystem::path& path, const std::vector<TraceRow>& trace) {
    std::ofstream out(path);
    if (!out)
        throw format_error("cannot create trace file: " + path.string());
    out << "epoch,step,mean_loss,lr\n";
    out.precision(17);
    for (const auto& row : trace)
        out << row.epoch << "," << row.step << "," << row.mean_loss << "," << row.lr << "\n";
    if (!out)
        throw format_error("failed to write trace file: " + path.string());
}

} // namespace emk
