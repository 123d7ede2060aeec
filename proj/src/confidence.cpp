#include "eauwseg/confidence.hpp"

#include <iomanip>
#include <random>

namespace eauwseg {

Grid<double> entropy_map(const ProbMap& p, double eps) {
    Grid<double> e(p.height(), p.width());
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double a = p[i], b = 1.0 - p[i];
        e[i] = -(a * std::log(a + eps) + b * std::log(b + eps));
    }
    return e;
}

SignedMap entropy_uncertainty(const Grid<double>& entropy, double mu) {
    SignedMap u(entropy.height(), entropy.width());
    for (std::size_t i = 0; i < entropy.size(); ++i) u[i] = entropy[i] >= mu ? -1 : 0;
    return u;
}

SignedMap class_uncertainty(const ClassProbMap& q, const BinaryMask& uncertain) {
    for (const auto& plane : q) require_same_shape(plane, uncertain, "class_uncertainty");
    SignedMap u(uncertain.height(), uncertain.width());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!uncertain[i]) continue;
        const double q0 = q[0][i], q1 = q[1][i], q2 = q[2][i];
        if (q1 > q0 && q1 > q2) u[i] = -1;
        else u[i] = q2 > q0 ? 1 : 0;
    }
    return u;
}

SignedMap prediction_uncertainty(const ProbMap& p, const BinaryMask& uncertain) {
    require_same_shape(p, uncertain, "prediction_uncertainty");
    SignedMap u(p.height(), p.width());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (uncertain[i]) u[i] = p[i] >= 0.5 ? 1 : 0;
    }
    return u;
}

SignedMap fuse_confidence(const SignedMap& u_class, const SignedMap& u_entropy, const BinaryMask& uncertain) {
    require_same_shape(u_class, uncertain, "fuse_confidence");
    require_same_shape(u_entropy, uncertain, "fuse_confidence");
    SignedMap u(uncertain.height(), uncertain.width());
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (uncertain[i]) u[i] = static_cast<std::int8_t>(std::max(u_class[i] + 2 * u_entropy[i], -1));
    }
    return u;
}

SignedMap pseudo_labels(const BinaryMask& certain_foreground, const SignedMap& fused, const BinaryMask& uncertain) {
    require_same_shape(certain_foreground, uncertain, "pseudo_labels");
    require_same_shape(fused, uncertain, "pseudo_labels");
    SignedMap y(uncertain.height(), uncertain.width());
    for (std::size_t i = 0; i < y.size(); ++i) {
        y[i] = static_cast<std::int8_t>(certain_foreground[i] * (1 - uncertain[i]) + fused[i]);
    }
    return y;
}

ConfidenceMaps compute_confidence(const ProbMap& p, const ClassProbMap* cls, const RegionPartition& partition,
                                  double mu, double eps) {
    ConfidenceMaps m;
    m.entropy = entropy_map(p, eps);
    m.u_entropy = entropy_uncertainty(m.entropy, mu);
    m.u_class = cls ? class_uncertainty(*cls, partition.uncertain) : prediction_uncertainty(p, partition.uncertain);
    m.fused = fuse_confidence(m.u_class, m.u_entropy, partition.uncertain);
    m.pseudo_label = pseudo_labels(partition.certain_foreground, m.fused, partition.uncertain);
    return m;
}

namespace {

void subsample(std::vector<int>& v, int cap, std::mt19937_64& rng) {
    if (cap < 0 || static_cast<int>(v.size()) <= cap) return;
    for (int i = 0; i < cap; ++i) {
        std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), v.size() - 1);
        std::swap(v[static_cast<std::size_t>(i)], v[pick(rng)]);
    }
    v.resize(static_cast<std::size_t>(cap));
}

} // namespace

ContrastiveSample select_samples(const ProbMap& p, const RegionPartition& partition, const SignedMap& pseudo_label,
                                 const SelectionOptions& options, std::uint64_t seed, SelectionStats* stats) {
    const auto& caps = options.caps;
    if (caps.anchors < 1 || caps.positives < 1 || caps.negatives < 1) {
        throw Error(ErrorCode::InvalidParams, "select_samples", "caps must be >= 1");
    }
    require_same_shape(p, partition.region, "select_samples");
    require_same_shape(pseudo_label, partition.region, "select_samples");

    std::vector<int> anchors;
    std::array<std::vector<int>, 2> certain;
    SelectionStats st;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto r = partition.region[i];
        const int idx = static_cast<int>(i);
        if (r == Region::Band) {
            if (pseudo_label[i] == 0 || pseudo_label[i] == 1) {
                anchors.push_back(idx);
                ++st.band_anchors;
            }
            continue;
        }
        const int label = r == Region::Inside ? 1 : 0;
        certain[static_cast<std::size_t>(label)].push_back(idx);
        if (options.hard_anchors && (p[i] >= 0.5 ? 1 : 0) != label) {
            anchors.push_back(idx);
            ++st.hard_anchors;
        }
    }
    st.empty_pool[0] = certain[0].empty();
    st.empty_pool[1] = certain[1].empty();

    std::mt19937_64 rng(seed);
    subsample(anchors, caps.anchors, rng);
    ContrastiveSample s;
    s.anchors = anchors;
    s.anchor_labels.reserve(anchors.size());
    for (int idx : anchors) {
        const auto i = static_cast<std::size_t>(idx);
        const auto r = partition.region[i];
        const int label = r == Region::Band ? pseudo_label[i] : (r == Region::Inside ? 1 : 0);
        s.anchor_labels.push_back(static_cast<std::uint8_t>(label));
    }
    for (int c = 0; c < 2; ++c) {
        s.positives[static_cast<std::size_t>(c)] = certain[static_cast<std::size_t>(c)];
        subsample(s.positives[static_cast<std::size_t>(c)], caps.positives, rng);
        s.negatives[static_cast<std::size_t>(c)] = certain[static_cast<std::size_t>(1 - c)];
        subsample(s.negatives[static_cast<std::size_t>(c)], caps.negatives, rng);
    }
    if (stats) *stats = st;
    return s;
}

void BandLabelTally::add(const SignedMap& fused, const BinaryMask& uncertain) {
    for (std::size_t i = 0; i < fused.size(); ++i) {
        if (uncertain[i]) ++counts[fused[i] + 1];
    }
}

double BandLabelTally::fraction(int label) const {
    const auto total = counts[0] + counts[1] + counts[2];
    return total == 0 ? 0.0 : static_cast<double>(counts[label + 1]) / static_cast<double>(total);
}

void write_band_tally_header(std::ostream& os) {
    os << "epoch,band_pixels,frac_uncertain,frac_background,frac_foreground\n";
}

void write_band_tally_row(std::ostream& os, int epoch, const BandLabelTally& t) {
    os << epoch << ',' << (t.counts[0] + t.counts[1] + t.counts[2]) << ',' << std::setprecision(6) << t.fraction(-1)
       << ',' << t.fraction(0) << ',' << t.fraction(1) << '\n';
}

} // namespace eauwseg
