#include "doctest.h"

#include <cmath>
#include <fstream>
#include <random>

#include "eauwseg/model.hpp"
#include "support.hpp"

using namespace eauwseg;

namespace {

template <typename T>
Tensor<T> random_images(int b, int c, int h, int w, std::uint64_t seed) {
    Tensor<T> t(b, c, h, w);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : t.data) v = static_cast<T>(u(rng));
    return t;
}

std::vector<double> random_weights(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> w(n);
    for (auto& v : w) v = u(rng);
    return w;
}

// Scalar probe: a fixed random linear functional of every requested output.
struct Probe {
    std::vector<double> ws, wc, we;

    double value(const ModelOutputs<double>& o) const {
        double s = 0;
        for (std::size_t i = 0; i < ws.size(); ++i) s += ws[i] * o.seg_prob.data[i];
        for (std::size_t i = 0; i < wc.size(); ++i) s += wc[i] * o.cls_prob.data[i];
        for (std::size_t i = 0; i < we.size(); ++i) s += we[i] * o.embed.data[i];
        return s;
    }
    OutputGrads<double> grads(const ModelOutputs<double>& o) const {
        OutputGrads<double> g;
        if (!ws.empty()) g.seg_prob = o.seg_prob, g.seg_prob.data = ws;
        if (!wc.empty()) g.cls_prob = o.cls_prob, g.cls_prob.data = wc;
        if (!we.empty()) g.embed = o.embed, g.embed.data = we;
        return g;
    }
};

// Zero-initialized biases put dead pixels exactly on a ReLU kink; move
// them to a generic point before differencing.
template <typename T>
void jitter_biases(UNet<T>& net, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-0.2, 0.2);
    for (auto* p : net.parameters()) {
        if (p->name.ends_with("bias")) {
            for (auto& v : p->value) v = static_cast<T>(u(rng));
        }
    }
}

ModelConfig micro_config() {
    ModelConfig c;
    c.in_channels = 2;
    c.base_channels = 2;
    c.depth = 1;
    c.embed_dim = 3;
    c.seed = 7;
    return c;
}

void finite_difference_check(bool seg, bool cls, bool embed) {
    UNet<double> net(micro_config());
    jitter_biases(net, 21);
    const auto x = random_images<double>(1, 2, 8, 8, 3);
    const HeadSelection heads{cls, embed};
    auto out = net.forward(x, heads);
    Probe probe;
    if (seg) probe.ws = random_weights(out.seg_prob.size(), 10);
    if (cls) probe.wc = random_weights(out.cls_prob.size(), 11);
    if (embed) probe.we = random_weights(out.embed.size(), 12);
    net.zero_grad();
    net.backward(probe.grads(out));

    const double h = 1e-4;
    int checked = 0, failures = 0;
    for (auto* p : net.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double up = probe.value(net.forward(x, heads));
            p->value[i] = saved - h;
            const double down = probe.value(net.forward(x, heads));
            p->value[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double analytic = p->grad[i];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            if (std::abs(numeric - analytic) > 1e-3 * scale) {
                ++failures;
                MESSAGE(p->name << "[" << i << "] analytic " << analytic << " numeric " << numeric);
            }
            ++checked;
        }
    }
    CHECK(checked == static_cast<int>(net.parameter_count()));
    CHECK(failures == 0);
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("default config: output shapes and parameter budget") {
    Model net(ModelConfig{});
    const auto x = random_images<float>(1, 3, 64, 64, 1);
    const auto out = net.forward(x);
    CHECK(out.seg_prob.shape == std::array<int, 4>{1, 1, 64, 64});
    CHECK(out.cls_prob.shape == std::array<int, 4>{1, 3, 64, 64});
    CHECK(out.embed.shape == std::array<int, 4>{1, 32, 64, 64});
    CHECK(net.parameter_count() > 50000);
    CHECK(net.parameter_count() < 200000);
}

TEST_CASE("depth 1 keeps outputs aligned") {
    ModelConfig c;
    c.depth = 1;
    Model net(c);
    const auto out = net.forward(random_images<float>(2, 3, 16, 24, 2));
    CHECK(out.seg_prob.shape == std::array<int, 4>{2, 1, 16, 24});
    CHECK(out.cls_prob.shape == std::array<int, 4>{2, 3, 16, 24});
    CHECK(out.embed.shape == std::array<int, 4>{2, 32, 16, 24});
}

TEST_CASE("same seed, same initial parameters") {
    ModelConfig c;
    c.seed = 123;
    Model a(c), b(c);
    CHECK(a.checksum() == b.checksum());
    c.seed = 124;
    Model d(c);
    CHECK(a.checksum() != d.checksum());
}

TEST_CASE("output invariants on random input") {
    Model net(ModelConfig{});
    const auto out = net.forward(random_images<float>(2, 3, 32, 32, 4));
    for (float v : out.seg_prob.data) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    const std::size_t plane = out.cls_prob.plane();
    for (int b = 0; b < 2; ++b) {
        for (std::size_t i = 0; i < plane; ++i) {
            double s = 0, norm = 0;
            for (int k = 0; k < 3; ++k) s += out.cls_prob.channel(b, k)[i];
            for (int k = 0; k < 32; ++k) norm += std::pow(out.embed.channel(b, k)[i], 2);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
            CHECK(norm == doctest::Approx(1.0).epsilon(1e-4));
        }
    }
}

TEST_CASE("inference is deterministic and needs no auxiliary heads") {
    Model net(ModelConfig{});
    const auto x = random_images<float>(2, 3, 32, 32, 5);
    const auto p1 = net.predict(x);
    const auto p2 = net.predict(x);
    CHECK(p1.data == p2.data);
    const auto full = net.forward(x);
    CHECK(full.seg_prob.data == p1.data);
    const auto seg_only = net.forward(x, HeadSelection{false, false});
    CHECK(seg_only.cls_prob.size() == 0);
    CHECK(seg_only.embed.size() == 0);
}

TEST_CASE("shape errors") {
    Model net(ModelConfig{});
    auto expect = [&](const Tensor<float>& x) {
        try {
            net.forward(x);
            FAIL("expected ShapeMismatch");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ShapeMismatch);
        }
    };
    expect(random_images<float>(1, 1, 64, 64, 1));
    expect(random_images<float>(1, 3, 60, 64, 1));
}

TEST_CASE("invalid configs") {
    for (auto tweak : {+[](ModelConfig& c) { c.depth = 0; }, +[](ModelConfig& c) { c.base_channels = 0; },
                       +[](ModelConfig& c) { c.embed_dim = 0; }}) {
        ModelConfig c;
        tweak(c);
        try {
            Model net(c);
            FAIL("expected InvalidConfig");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::InvalidConfig);
        }
    }
}

TEST_CASE("segmentation gradient matches finite differences") {
    finite_difference_check(true, false, false);
}

TEST_CASE("class head gradient matches finite differences") {
    finite_difference_check(false, true, false);
}

TEST_CASE("embedding head gradient matches finite differences") {
    finite_difference_check(false, false, true);
}

TEST_CASE("all heads together match finite differences at depth 2") {
    UNet<double> net([] {
        auto c = micro_config();
        c.depth = 2;
        return c;
    }());
    jitter_biases(net, 22);
    const auto x = random_images<double>(2, 2, 8, 8, 6);
    auto out = net.forward(x);
    Probe probe{random_weights(out.seg_prob.size(), 1), random_weights(out.cls_prob.size(), 2),
                random_weights(out.embed.size(), 3)};
    net.zero_grad();
    net.backward(probe.grads(out));
    const double h = 1e-4;
    int failures = 0;
    for (auto* p : net.parameters()) {
        for (std::size_t i = 0; i < p->value.size(); i += 3) {
            const double saved = p->value[i];
            p->value[i] = saved + h;
            const double up = probe.value(net.forward(x));
            p->value[i] = saved - h;
            const double down = probe.value(net.forward(x));
            p->value[i] = saved;
            const double numeric = (up - down) / (2 * h);
            const double scale = std::max({std::abs(numeric), std::abs(p->grad[i]), 1e-4});
            failures += std::abs(numeric - p->grad[i]) > 1e-3 * scale;
        }
    }
    CHECK(failures == 0);
}

TEST_CASE("every head pushes gradient into the encoder") {
    const auto x = random_images<float>(2, 3, 32, 32, 8);
    for (int head = 0; head < 3; ++head) {
        Model net(ModelConfig{});
        auto out = net.forward(x);
        OutputGrads<float> g;
        if (head == 0) g.seg_prob = out.seg_prob;
        if (head == 1) g.cls_prob = out.cls_prob;
        if (head == 2) g.embed = out.embed;
        for (auto* t : {&g.seg_prob, &g.cls_prob, &g.embed}) {
            std::mt19937_64 rng(static_cast<std::uint64_t>(head));
            std::normal_distribution<float> n(0.0f, 1.0f);
            for (auto& v : t->data) v = n(rng);
        }
        net.zero_grad();
        net.backward(g);
        auto* first = net.parameters().front();
        double mag = 0;
        for (float v : first->grad) mag += std::abs(v);
        CHECK(mag > 0.0);
    }
}

TEST_CASE("checkpoint round trip") {
    const auto dir = testutil::temp_dir("ckpt");
    ModelConfig c;
    c.seed = 77;
    c.depth = 2;
    Model net(c);
    save_checkpoint(dir / "m.bin", net, "mode=eauwseg\n", "rng 1 2 3");
    const auto ck = read_checkpoint(dir / "m.bin");
    CHECK(ck.model.depth == 2);
    CHECK(ck.model.seed == 77);
    CHECK(ck.run_config == "mode=eauwseg\n");
    CHECK(ck.rng_state == "rng 1 2 3");
    Model back = load_model(ck);
    CHECK(back.checksum() == net.checksum());
    const auto x = random_images<float>(1, 3, 32, 32, 9);
    CHECK(back.predict(x).data == net.predict(x).data);
}

TEST_CASE("corrupt checkpoints are rejected") {
    const auto dir = testutil::temp_dir("ckpt_bad");
    {
        std::ofstream out(dir / "bad.bin", std::ios::binary);
        out << "NOTACHECKPOINT";
    }
    CHECK_THROWS_AS(read_checkpoint(dir / "bad.bin"), Error);
    try {
        read_checkpoint(dir / "missing.bin");
        FAIL("expected MissingFile");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MissingFile);
    }
}

}
