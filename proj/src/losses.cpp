#include "eauwseg/losses.hpp"

#include <cmath>
#include <iomanip>
#include <limits>

#include <Eigen/Core>

namespace eauwseg {

namespace {

template <typename A, typename B>
void require_shape(const A& a, const B& b, const char* where) {
    if (!a.same_shape(b)) throw Error(ErrorCode::ShapeMismatch, where, "input shapes differ");
}

void require_grad(const ProbMap* grad, const ProbMap& p, const char* where) {
    if (grad && !grad->same_shape(p)) throw Error(ErrorCode::ShapeMismatch, where, "gradient buffer shape");
}

} // namespace

double dice_loss(const ProbMap& p, const BinaryMask& y, ProbMap* grad, double weight) {
    require_shape(p, y, "dice_loss");
    require_grad(grad, p, "dice_loss");
    double inter = 0, pp = 0, yy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        inter += p[i] * y[i];
        pp += p[i] * p[i];
        yy += y[i];
    }
    const double num = 2.0 * inter + kDiceSmooth;
    const double den = pp + yy + kDiceSmooth;
    if (grad) {
        const double inv = weight / (den * den);
        for (std::size_t i = 0; i < p.size(); ++i) {
            (*grad)[i] -= (2.0 * y[i] * den - 2.0 * p[i] * num) * inv;
        }
    }
    return 1.0 - num / den;
}

CertainLoss certain_loss(const ProbMap& p, const BinaryMask& inscribed, const BinaryMask& envelope, ProbMap* grad,
                         double weight) {
    CertainLoss out;
    out.l_in = dice_loss(p, inscribed, grad, weight);
    out.l_en = dice_loss(p, envelope, grad, weight);
    out.l_c = out.l_in + out.l_en;
    return out;
}

double partial_ce(const ProbMap& p, const Grid<std::uint8_t>& labels, double eps, std::uint8_t ignore, ProbMap* grad,
                  double weight) {
    require_shape(p, labels, "partial_ce");
    require_grad(grad, p, "partial_ce");
    double sum = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (labels[i] == ignore) continue;
        sum -= labels[i] ? std::log(p[i] + eps) : std::log(1.0 - p[i] + eps);
        ++n;
    }
    if (n == 0) return 0.0;
    if (grad) {
        const double scale = weight / static_cast<double>(n);
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (labels[i] == ignore) continue;
            (*grad)[i] += labels[i] ? -scale / (p[i] + eps) : scale / (1.0 - p[i] + eps);
        }
    }
    return sum / static_cast<double>(n);
}

double classification_loss(const ClassProbMap& q, const Grid<std::uint8_t>& labels, double eps, ClassProbMap* grad,
                           double weight) {
    for (const auto& plane : q) require_shape(plane, labels, "classification_loss");
    if (grad) {
        for (const auto& plane : *grad) require_shape(plane, labels, "classification_loss");
    }
    const auto n = static_cast<double>(labels.size());
    double sum = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int k = labels[i];
        if (k > 2) throw Error(ErrorCode::InvalidParams, "classification_loss", "label outside {0,1,2}");
        sum -= std::log(q[static_cast<std::size_t>(k)][i] + eps);
        if (grad) (*grad)[static_cast<std::size_t>(k)][i] -= weight / (n * (q[static_cast<std::size_t>(k)][i] + eps));
    }
    return n > 0 ? sum / n : 0.0;
}

ContrastiveResult pixel_contrastive_loss(const Tensor<double>& embed, const ContrastiveSample& sample, double tau,
                                         Tensor<double>* grad, double weight) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    if (embed.n() != 1) throw Error(ErrorCode::ShapeMismatch, "pixel_contrastive_loss", "expected one image");
    if (grad && grad->shape != embed.shape) {
        throw Error(ErrorCode::ShapeMismatch, "pixel_contrastive_loss", "gradient buffer shape");
    }
    if (sample.anchors.size() != sample.anchor_labels.size()) {
        throw Error(ErrorCode::InvalidParams, "pixel_contrastive_loss", "anchor labels do not match anchors");
    }
    const int dim = embed.c();
    const auto plane = static_cast<int>(embed.plane());

    auto gather = [&](const std::vector<int>& idx) {
        Mat m(static_cast<Eigen::Index>(idx.size()), dim);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            if (idx[r] < 0 || idx[r] >= plane) {
                throw Error(ErrorCode::InvalidParams, "pixel_contrastive_loss", "pixel index out of range");
            }
            for (int c = 0; c < dim; ++c) m(static_cast<Eigen::Index>(r), c) = embed.channel(0, c)[static_cast<std::size_t>(idx[r])];
        }
        return m;
    };
    auto scatter = [&](const std::vector<int>& idx, const Mat& g, double scale) {
        for (std::size_t r = 0; r < idx.size(); ++r) {
            for (int c = 0; c < dim; ++c) grad->channel(0, c)[static_cast<std::size_t>(idx[r])] += scale * g(static_cast<Eigen::Index>(r), c);
        }
    };

    ContrastiveResult res;
    double total = 0;
    struct Pending {
        std::vector<int> anchors;
        Mat a, pos, neg, gp, gn;
    };
    std::array<Pending, 2> pending;

    for (int cls = 0; cls < 2; ++cls) {
        auto& pd = pending[static_cast<std::size_t>(cls)];
        for (std::size_t i = 0; i < sample.anchors.size(); ++i) {
            if (sample.anchor_labels[i] == cls) pd.anchors.push_back(sample.anchors[i]);
            else if (sample.anchor_labels[i] > 1) {
                throw Error(ErrorCode::InvalidParams, "pixel_contrastive_loss", "anchor label must be 0 or 1");
            }
        }
        if (pd.anchors.empty()) continue;
        const auto& pos_idx = sample.positives[static_cast<std::size_t>(cls)];
        const auto& neg_idx = sample.negatives[static_cast<std::size_t>(cls)];
        pd.a = gather(pd.anchors);
        pd.pos = gather(pos_idx);
        pd.neg = gather(neg_idx);
        const Mat sp = (pd.a * pd.pos.transpose()) / tau;
        const Mat sn = (pd.a * pd.neg.transpose()) / tau;
        pd.gp = Mat::Zero(sp.rows(), sp.cols());
        pd.gn = Mat::Zero(sn.rows(), sn.cols());
        const auto nn = static_cast<double>(neg_idx.size());
        for (Eigen::Index r = 0; r < sp.rows(); ++r) {
            const int self = pd.anchors[static_cast<std::size_t>(r)];
            int npos = 0;
            for (int v : pos_idx) npos += v != self;
            if (npos == 0 || neg_idx.empty()) {
                ++res.anchors_skipped;
                continue;
            }
            double neg_mean = 0;
            for (Eigen::Index j = 0; j < sn.cols(); ++j) neg_mean += std::exp(sn(r, j));
            neg_mean /= nn;
            double loss = 0, inv_sum = 0;
            for (Eigen::Index j = 0; j < sp.cols(); ++j) {
                if (pos_idx[static_cast<std::size_t>(j)] == self) continue;
                const double s = sp(r, j);
                const double denom = std::exp(s) + neg_mean;
                loss += std::log(denom) - s;
                pd.gp(r, j) = -neg_mean / (denom * npos);
                inv_sum += 1.0 / denom;
            }
            for (Eigen::Index j = 0; j < sn.cols(); ++j) {
                pd.gn(r, j) = inv_sum * std::exp(sn(r, j)) / (nn * npos);
            }
            total += loss / npos;
            ++res.anchors_used;
        }
    }

    if (res.anchors_used == 0) {
        res.degenerate = true;
        return res;
    }
    res.loss = total / res.anchors_used;
    if (grad) {
        const double scale = weight / (res.anchors_used * tau);
        for (int cls = 0; cls < 2; ++cls) {
            auto& pd = pending[static_cast<std::size_t>(cls)];
            if (pd.anchors.empty()) continue;
            const Mat da = pd.gp * pd.pos + pd.gn * pd.neg;
            const Mat dpos = pd.gp.transpose() * pd.a;
            const Mat dneg = pd.gn.transpose() * pd.a;
            scatter(pd.anchors, da, scale);
            scatter(sample.positives[static_cast<std::size_t>(cls)], dpos, scale);
            scatter(sample.negatives[static_cast<std::size_t>(cls)], dneg, scale);
        }
    }
    return res;
}

void validate(const LossWeights& w) {
    if (!(w.lambda1 >= 0) || !(w.lambda2 >= 0)) throw Error(ErrorCode::InvalidConfig, "LossWeights", "lambda must be >= 0");
    if (!(w.tau > 0)) throw Error(ErrorCode::InvalidConfig, "LossWeights", "tau must be > 0");
    if (!(w.eps > 0)) throw Error(ErrorCode::InvalidConfig, "LossWeights", "eps must be > 0");
}

LossBundle total_loss(const CertainLoss& certain, double l_ce, double l_pcl, const LossWeights& weights, int epoch,
                      int warmup_epochs) {
    LossBundle b;
    b.l_c = certain.l_c;
    b.l_in = certain.l_in;
    b.l_en = certain.l_en;
    b.auxiliary_active = epoch >= warmup_epochs;
    if (b.auxiliary_active) {
        b.l_ce = l_ce;
        b.l_pcl = l_pcl;
    }
    b.total = b.l_c + weights.lambda1 * b.l_pcl + weights.lambda2 * b.l_ce;
    return b;
}

void write_loss_log_header(std::ostream& os) {
    os << "step,epoch,l_c,l_in,l_en,l_ce,l_pcl,total,anchors_used,anchors_skipped\n";
}

void write_loss_log_row(std::ostream& os, const LossLogRow& r) {
    const auto old = os.precision(std::numeric_limits<double>::max_digits10);
    os << r.step << ',' << r.epoch << ',' << r.loss.l_c << ',' << r.loss.l_in << ',' << r.loss.l_en << ','
       << r.loss.l_ce << ',' << r.loss.l_pcl << ',' << r.loss.total << ',' << r.anchors_used << ','
       << r.anchors_skipped << '\n';
    os.precision(old);
}

} // namespace eauwseg
