#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ppe/encoder.hpp"
#include "ppe/errors.hpp"
#include "ppe/rng.hpp"

using namespace ppe;

namespace {

Architecture two_layer() {
    return {LayerSpec::conv(3, 4, 3, Activation::ReLU), LayerSpec::conv(4, 1, 3, Activation::Logistic)};
}

Sample small_sample(std::uint64_t seed, int size = 8) {
    return make_sample(generate_scene(ScenarioFamily::uniform_clutter(0.2), seed, size, size));
}

// Fresh models have zero biases, which puts all-zero input pixels exactly
// on the ReLU kink; random biases move the check to a differentiable point.
EncoderModel with_random_biases(EncoderModel m, std::uint64_t seed) {
    Rng rng(seed);
    for (auto& b : m.params.biases)
        for (double& v : b) v = 0.2 * uniform01(rng) - 0.1;
    return m;
}

EncoderModel zero_model(const Architecture& arch) {
    EncoderModel m = init_model(arch, 0);
    m.params = ParameterSet::zeros_like(arch);
    return m;
}

// Independent dense reference for a single conv layer with same padding.
std::vector<double> reference_conv(const Tensor3& x, const std::vector<double>& w,
                                   const std::vector<double>& b, int out_ch, int k) {
    const int pad = k / 2;
    std::vector<double> y(std::size_t(out_ch) * x.plane(), 0.0);
    for (int o = 0; o < out_ch; ++o)
        for (int r = 0; r < x.height; ++r)
            for (int c = 0; c < x.width; ++c) {
                double acc = b[std::size_t(o)];
                for (int i = 0; i < x.channels; ++i)
                    for (int ky = 0; ky < k; ++ky)
                        for (int kx = 0; kx < k; ++kx) {
                            const int rr = r + ky - pad, cc = c + kx - pad;
                            if (rr < 0 || cc < 0 || rr >= x.height || cc >= x.width) continue;
                            acc += w[((std::size_t(o) * x.channels + i) * k + ky) * k + kx] *
                                   x.data[(std::size_t(i) * x.height + rr) * x.width + cc];
                        }
                y[(std::size_t(o) * x.height + r) * x.width + c] = acc;
            }
    return y;
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("init is deterministic per seed") {
    const EncoderModel a = init_model(default_architecture(), 0);
    const EncoderModel b = init_model(default_architecture(), 0);
    const EncoderModel c = init_model(default_architecture(), 1);
    CHECK(a.params == b.params);
    CHECK_FALSE(a.params == c.params);
    for (const auto& bias : a.params.biases)
        for (double v : bias) CHECK(v == 0.0);
    CHECK(a.params.all_finite());
}

TEST_CASE("He initialisation scale") {
    const EncoderModel m = init_model(local_architecture(), 3);
    const auto& w = m.params.weights[1];  // 16 -> 16, 3x3, fan_in 144
    double sum = 0.0, sq = 0.0;
    for (double v : w) {
        sum += v;
        sq += v * v;
    }
    const double n = double(w.size());
    const double var = sq / n - (sum / n) * (sum / n);
    CHECK(var == doctest::Approx(2.0 / 144.0).epsilon(0.15));
}

TEST_CASE("incompatible architectures are rejected") {
    Architecture bad = local_architecture();
    bad[1].in_ch = 8;
    CHECK_THROWS_AS(init_model(bad, 0), IncompatibleArchitecture);
    Architecture no_head = {LayerSpec::conv(3, 1, 3, Activation::ReLU)};
    CHECK_THROWS_AS(init_model(no_head, 0), IncompatibleArchitecture);
    Architecture wide_head = {LayerSpec::conv(3, 2, 3, Activation::Logistic)};
    CHECK_THROWS_AS(init_model(wide_head, 0), IncompatibleArchitecture);
    Architecture bad_kernel = {LayerSpec::conv(3, 1, 5, Activation::Logistic)};
    CHECK_THROWS_AS(init_model(bad_kernel, 0), IncompatibleArchitecture);
    Architecture hp_last = {LayerSpec::half_plane_max(3)};
    CHECK_THROWS_AS(init_model(hp_last, 0), IncompatibleArchitecture);
    CHECK_THROWS_AS(init_model({}, 0), IncompatibleArchitecture);
}

TEST_CASE("parameter counts follow the analytic formula") {
    std::size_t local = 0;
    for (auto [in, out] : {std::pair{3, 16}, {16, 16}, {16, 16}, {16, 1}}) local += std::size_t(in * out * 9 + out);
    CHECK(parameter_count(local_architecture()) == local);
    CHECK(init_model(local_architecture(), 0).parameter_count() == local);

    const std::size_t def = (3 * 8 + 8) + (40 * 16 + 16) + 3 * (16 * 16 * 9 + 16) + (16 * 9 + 1);
    CHECK(parameter_count(default_architecture()) == def);
    CHECK(init_model(default_architecture(), 0).parameter_count() == def);
}

TEST_CASE("zero weights give 0.5 everywhere") {
    for (const auto& arch : {default_architecture(), local_architecture()}) {
        const RegionProbabilities p = forward(zero_model(arch), small_sample(1).input);
        for (double v : p.values) CHECK(v == 0.5);
    }
}

TEST_CASE("forward output shape, range and determinism") {
    const EncoderModel m = init_model(default_architecture(), 5);
    const Tensor3 x = encode_input(generate_scene(ScenarioFamily::uniform_clutter(0.2), 3));
    const RegionProbabilities a = forward(m, x);
    const RegionProbabilities b = forward(m, x);
    CHECK(a.width == 60);
    CHECK(a.height == 60);
    CHECK(a.values.size() == 3600);
    CHECK(a.values == b.values);
    for (double v : a.values) {
        CHECK(v >= kProbClamp);
        CHECK(v <= 1.0 - kProbClamp);
    }
}

TEST_CASE("forward rejects wrong channel count") {
    Tensor3 x(4, 8, 8);
    CHECK_THROWS_AS(forward(init_model(default_architecture(), 0), x), ShapeMismatch);
}

TEST_CASE("single conv layer matches a dense reference") {
    for (int k : {1, 3}) {
        const Architecture arch{LayerSpec::conv(3, 1, k, Activation::Logistic)};
        EncoderModel m = init_model(arch, 11);
        m.params.biases[0][0] = 0.3;
        const Sample s = small_sample(4, 7);
        const auto z = reference_conv(s.input, m.params.weights[0], m.params.biases[0], 1, k);
        const RegionProbabilities p = forward(m, s.input);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(p.values[i] == doctest::Approx(std::clamp(logistic(z[i]), kProbClamp, 1 - kProbClamp)).epsilon(1e-12));
    }
}

TEST_CASE("half-plane layer exposes the maximum over each half-plane") {
    // Marker conv picks out the red channel, half-plane maps feed a head
    // that only reads the "above" map of that channel.
    const Architecture arch{LayerSpec::conv(3, 1, 1, Activation::ReLU), LayerSpec::half_plane_max(1),
                            LayerSpec::conv(5, 1, 1, Activation::Logistic)};
    EncoderModel m = zero_model(arch);
    m.params.weights[0] = {1.0, -1.0, -1.0};  // red and not green/blue: only the start pixel
    m.params.weights[2] = {0.0, 10.0, 0.0, 0.0, 0.0};
    m.params.biases[2] = {-5.0};
    const GridScene s = GridScene::empty(6, 6, {2, 3}, {5, 5});
    const RegionProbabilities p = forward(m, encode_input(s));
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
            // "above" at (r, c): max over every cell in rows <= r.
            const bool sees_start = r >= 2;
            CAPTURE(r);
            CAPTURE(c);
            CHECK((p.values[std::size_t(r * 6 + c)] > 0.5) == sees_start);
        }
}

TEST_CASE("loss of a perfect prediction is tiny") {
    const Sample s = small_sample(2);
    RegionProbabilities p{s.label.width, s.label.height, {}};
    for (auto m : s.label.mask) p.values.push_back(m ? 1.0 - kProbClamp : kProbClamp);
    CHECK(loss(p, s.label, LossWeighting::uniform()) <= 1e-6);
}

TEST_CASE("loss of 0.5 everywhere is ln 2") {
    const Sample s = small_sample(2);
    RegionProbabilities p{s.label.width, s.label.height, std::vector<double>(s.label.mask.size(), 0.5)};
    CHECK(loss(p, s.label, LossWeighting::uniform()) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("Gaussian weighting with a huge sigma equals uniform") {
    const Sample s = small_sample(6);
    const RegionProbabilities p = forward(init_model(default_architecture(), 2), s.input);
    const double u = loss(p, s.label, LossWeighting::uniform());
    const double g = loss(p, s.label, LossWeighting::gaussian(1e6));
    CHECK(std::abs(u - g) <= 1e-9);
}

TEST_CASE("distance to path and Gaussian weights") {
    const GridScene s = GridScene::empty(1, 5, {0, 0}, {0, 2});
    const PathLabel l = compute_label(s);
    const auto d = distance_to_path(l);
    CHECK(d == std::vector<int>{0, 0, 0, 1, 2});
    const auto w = loss_weights(l, LossWeighting::gaussian(1.0));
    CHECK(w[2] == 1.0);
    CHECK(w[3] == doctest::Approx(std::exp(-0.5)));
    CHECK(w[4] == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("loss rejects mismatched shapes") {
    const Sample s = small_sample(2);
    RegionProbabilities p{4, 4, std::vector<double>(16, 0.5)};
    CHECK_THROWS_AS(loss(p, s.label, {}), ShapeMismatch);
}

TEST_CASE("positive weight scales the path term") {
    const Sample s = small_sample(3);
    RegionProbabilities p{s.label.width, s.label.height, std::vector<double>(s.label.mask.size(), 0.3)};
    const double n = double(s.label.mask.size());
    const double pos = double(std::count(s.label.mask.begin(), s.label.mask.end(), 1));
    const double expected = (3.0 * pos * -std::log(0.3) + (n - pos) * -std::log(0.7)) / n;
    CHECK(loss(p, s.label, {}, 3.0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("output bias gradient of a zero model is mean(pred - label)") {
    const Sample s = small_sample(8);
    const EncoderModel m = zero_model(local_architecture());
    const BatchGradient g = backward(m, std::span<const Sample>(&s, 1), {});
    const double label_mean = std::accumulate(s.label.mask.begin(), s.label.mask.end(), 0.0) /
                              double(s.label.mask.size());
    CHECK(g.grads.biases.back()[0] == doctest::Approx(0.5 - label_mean).epsilon(1e-12));
    CHECK(g.loss == doctest::Approx(std::log(2.0)));
}

TEST_CASE("duplicated batch gives the same gradient") {
    const EncoderModel m = init_model(default_architecture(), 4);
    const Sample s = small_sample(9);
    const std::vector<Sample> one{s}, two{s, s};
    const BatchGradient a = backward(m, one, {}, 5.0);
    const BatchGradient b = backward(m, two, {}, 5.0);
    CHECK(a.grads == b.grads);
    CHECK(a.loss == b.loss);
}

TEST_CASE("batch gradient is the mean of sample gradients") {
    const EncoderModel m = init_model(default_architecture(), 4);
    const std::vector<Sample> batch{small_sample(1), small_sample(2), small_sample(3)};
    const BatchGradient all = backward(m, batch, {});
    ParameterSet sum = ParameterSet::zeros_like(m.arch);
    for (const auto& s : batch) sum.add(backward(m, std::span<const Sample>(&s, 1), {}).grads);
    sum.scale(1.0 / 3.0);
    for (std::size_t i = 0; i < sum.size(); ++i)
        CHECK(all.grads.at(i) == doctest::Approx(sum.at(i)).epsilon(1e-12));
}

TEST_CASE("backward rejects empty batches and mismatched samples") {
    const EncoderModel m = init_model(default_architecture(), 4);
    CHECK_THROWS_AS(backward(m, {}, {}), std::invalid_argument);
    Sample bad = small_sample(1);
    bad.label.mask.pop_back();
    CHECK_THROWS_AS(backward(m, std::span<const Sample>(&bad, 1), {}), ShapeMismatch);
}

TEST_CASE("grad_check on random two-layer models") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CAPTURE(seed);
        const EncoderModel m = with_random_biases(init_model(two_layer(), seed), seed);
        CHECK(grad_check(m, small_sample(seed), 1e-5) < 1e-4);
    }
}

TEST_CASE("default architecture gradients match central differences") {
    // Mixed tolerance: deep-net gradients can be ~1e-9, where the
    // difference quotient is pure roundoff and a relative error is noise.
    const LossWeighting lw = LossWeighting::gaussian(2.0);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        CAPTURE(seed);
        const EncoderModel m = with_random_biases(init_model(default_architecture(), seed), seed);
        const Sample s = small_sample(seed + 40);
        const auto g = backward(m, std::span<const Sample>(&s, 1), lw, 10.0).grads;
        EncoderModel probe = m;
        Rng rng(seed);
        for (int k = 0; k < 200; ++k) {
            const std::size_t i = uniform_index(rng, m.params.size());
            const double orig = probe.params.at(i);
            const double h = 1e-5;
            probe.params.at(i) = orig + h;
            const double up = loss(forward(probe, s.input), s.label, lw, 10.0);
            probe.params.at(i) = orig - h;
            const double down = loss(forward(probe, s.input), s.label, lw, 10.0);
            probe.params.at(i) = orig;
            const double numeric = (up - down) / (2 * h);
            CAPTURE(i);
            CHECK(std::abs(g.at(i) - numeric) <= 1e-4 * std::abs(numeric) + 1e-9);
        }
    }
}

TEST_CASE("grad_check of a linear 1x1 layer is near exact") {
    const Architecture arch{LayerSpec::conv(3, 1, 1, Activation::Logistic)};
    const EncoderModel m = init_model(arch, 3);
    CHECK(grad_check(m, small_sample(3), 1e-5) < 1e-7);
}

TEST_CASE("grad_check error grows with a coarse step") {
    const EncoderModel m = with_random_biases(init_model(two_layer(), 7), 7);
    const Sample s = small_sample(7);
    CHECK(grad_check(m, s, 1e-1) > grad_check(m, s, 1e-5));
}

TEST_CASE("training with zero learning rate changes nothing") {
    const EncoderModel m = init_model(default_architecture(), 1);
    const std::vector<Sample> data{small_sample(1), small_sample(2), small_sample(3)};
    TrainConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 2;
    cfg.learning_rate = 0.0;
    cfg.optimizer.kind = OptimizerKind::SGD;
    const TrainResult r = train(m, data, cfg);
    CHECK(r.model.params == m.params);
    REQUIRE(r.history.size() == 4);
    for (double h : r.history) CHECK(h == r.history.front());
}

TEST_CASE("training is deterministic and reduces the loss") {
    const EncoderModel m = init_model(default_architecture(), 1);
    std::vector<Sample> data;
    for (std::uint64_t s = 0; s < 6; ++s) data.push_back(small_sample(s, 12));
    TrainConfig cfg;
    cfg.epochs = 30;
    cfg.batch_size = 3;
    cfg.learning_rate = 1e-2;
    cfg.seed = 5;
    const TrainResult a = train(m, data, cfg);
    const TrainResult b = train(m, data, cfg);
    CHECK(a.model.params == b.model.params);
    CHECK(a.history == b.history);
    CHECK(a.history.size() == 30);
    CHECK(a.history.back() < a.history.front());
}

TEST_CASE("train config validation") {
    TrainConfig cfg;
    cfg.learning_rate = -1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.weighting = LossWeighting::gaussian(0.0);
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    const std::vector<Sample> none;
    CHECK_THROWS_AS(train(init_model(default_architecture(), 0), none, TrainConfig{}), std::invalid_argument);
}

TEST_CASE("divergence is detected") {
    EncoderModel m = init_model(default_architecture(), 1);
    m.params.weights[0][0] = std::numeric_limits<double>::quiet_NaN();
    const std::vector<Sample> data{small_sample(1)};
    TrainConfig cfg;
    cfg.epochs = 1;
    CHECK_THROWS_AS(train(m, data, cfg), DivergenceDetected);
}
