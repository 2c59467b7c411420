#include <cmath>

#include "doctest.h"
#include "qdiag/training.hpp"
#include "test_helpers.hpp"

using namespace qdiag;

TEST_CASE("update_params") {
    SUBCASE("data == model at momentum 1 is a fixed point") {
        const auto p = testutil::random_rbm(3, 2, 10);
        const auto est = exact_expectations(p);
        TrainingConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.momentum = 1.0;
        const auto next = update_params(p, est, est, cfg);
        CHECK(next.weights.values() == p.weights.values());
        CHECK(next.visible_bias == p.visible_bias);
        CHECK(next.hidden_bias == p.hidden_bias);
    }
    SUBCASE("hand case: momentum 1, lr 0.1, gap 0.4 gives 0.04") {
        auto p = RbmParams::zeros(1, 1);
        ExpectationEstimate data, model;
        data.pair_expectation = Matrix(1, 1, 0.6);
        model.pair_expectation = Matrix(1, 1, 0.2);
        data.visible_expectation = model.visible_expectation = {0.0};
        data.hidden_expectation = model.hidden_expectation = {0.0};
        TrainingConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.momentum = 1.0;
        CHECK(update_params(p, data, model, cfg).weights(0, 0) ==
              doctest::Approx(0.04).epsilon(1e-14));
    }
    SUBCASE("momentum scales the previous parameter value") {
        auto p = RbmParams::zeros(1, 1);
        p.weights(0, 0) = 1.0;
        ExpectationEstimate zero;
        zero.pair_expectation = Matrix(1, 1);
        zero.visible_expectation = {0.0};
        zero.hidden_expectation = {0.0};
        TrainingConfig cfg;
        cfg.momentum = 0.5;
        cfg.learning_rate = 0.1;
        CHECK(update_params(p, zero, zero, cfg).weights(0, 0) == 0.5);
    }
    SUBCASE("dimension mismatch names the offending block") {
        auto p = RbmParams::zeros(2, 1);
        ExpectationEstimate bad;
        bad.pair_expectation = Matrix(1, 1);
        bad.visible_expectation = {0.0, 0.0};
        bad.hidden_expectation = {0.0};
        CHECK_THROWS_AS(update_params(p, bad, bad, {}), DimensionError);
    }
}

TEST_CASE("forward_layer") {
    SUBCASE("zero params give 0.5 everywhere, shape rows x hidden") {
        const auto p = RbmParams::zeros(3, 2);
        const Matrix out = forward_layer(p, Matrix(4, 3, 1.0));
        CHECK(out.rows() == 4);
        CHECK(out.cols() == 2);
        for (double x : out.values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("sigma(ln 3) = 0.75") {
        auto p = RbmParams::zeros(1, 1);
        p.weights(0, 0) = std::log(3.0);
        CHECK(forward_layer(p, Matrix(1, 1, 1.0))(0, 0) ==
              doctest::Approx(0.75).epsilon(1e-12));
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(forward_layer(RbmParams::zeros(3, 2), Matrix(1, 2)), DimensionError);
    }
}

TEST_CASE("reconstruction_loss") {
    SUBCASE("identical binary matrices give near-zero cross-entropy") {
        const Matrix m = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
        CHECK(reconstruction_loss(m, m, LossMetric::CrossEntropy) <= 1e-6);
    }
    SUBCASE("[[1]] vs [[0.5]] gives ln 2") {
        CHECK(reconstruction_loss(Matrix(1, 1, 1.0), Matrix(1, 1, 0.5),
                                  LossMetric::CrossEntropy) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("mean square of [[1]] vs [[0]] is 1") {
        CHECK(reconstruction_loss(Matrix(1, 1, 1.0), Matrix(1, 1, 0.0),
                                  LossMetric::MeanSquare) == 1.0);
    }
    SUBCASE("shape mismatch and domain errors") {
        CHECK_THROWS_AS(reconstruction_loss(Matrix(1, 2), Matrix(2, 1), LossMetric::MeanSquare),
                        DimensionError);
        CHECK_THROWS_AS(reconstruction_loss(Matrix(1, 1, 2.0), Matrix(1, 1, 0.5),
                                            LossMetric::CrossEntropy),
                        Error);
    }
}

TEST_CASE("train_rbm") {
    SUBCASE("single repeated pattern: its marginal strictly increases") {
        Matrix data(8, 3);
        for (std::size_t r = 0; r < 8; ++r) {
            data(r, 0) = 1.0;
            data(r, 2) = 1.0;
        }
        TrainingConfig cfg;
        cfg.learning_rate = 0.1;
        cfg.epochs = 1;
        cfg.batch_size = 8;
        cfg.sampler.kind = SamplerKind::Exact;
        RbmParams p = RbmParams::random_init(3, 2, UnitKind::Bernoulli, 12);
        const std::vector<double> pattern = {1.0, 0.0, 1.0};
        double prev = marginal_visible(p, pattern);
        for (int round = 0; round < 50; ++round) {
            p = train_rbm(p, data, cfg).params;
            const double cur = marginal_visible(p, pattern);
            CHECK(cur > prev);
            prev = cur;
        }
        CHECK(prev > 0.5);
    }
    SUBCASE("zero learning rate leaves parameters unchanged and the loss flat") {
        const auto init = testutil::random_rbm(3, 2, 13);
        Matrix data = Matrix::from_rows({{1, 0, 1}, {0, 1, 0}});
        TrainingConfig cfg;
        cfg.learning_rate = 0.0;
        cfg.epochs = 5;
        cfg.sampler.kind = SamplerKind::Cd;
        const auto result = train_rbm(init, data, cfg);
        CHECK(result.params.weights.values() == init.weights.values());
        CHECK(result.params.visible_bias == init.visible_bias);
        for (const auto& [epoch, loss] : result.curve.points)
            CHECK(loss == result.curve.points.front().second);
    }
    SUBCASE("identical seeds give identical loss curves") {
        const auto init = testutil::random_rbm(3, 2, 14);
        Matrix data(20, 3);
        Rng rng(15);
        for (double& x : data.values()) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
        TrainingConfig cfg;
        cfg.epochs = 6;
        cfg.batch_size = 5;
        cfg.rng_seed = 77;
        cfg.sampler.kind = SamplerKind::Cd;
        const auto a = train_rbm(init, data, cfg);
        const auto b = train_rbm(init, data, cfg);
        CHECK(a.curve.points == b.curve.points);
        CHECK(a.params.weights.values() == b.params.weights.values());
    }
    SUBCASE("diverging learning rate aborts with the epoch and batch location") {
        auto init = RbmParams::random_init(2, 2, UnitKind::Gaussian, 16);
        Matrix data(16, 2);
        Rng rng(17);
        for (double& x : data.values()) x = rng.normal();
        TrainingConfig cfg;
        cfg.learning_rate = 1e30;
        cfg.epochs = 40;
        cfg.batch_size = 4;
        cfg.sampler.kind = SamplerKind::Cd;
        CHECK_THROWS_WITH_AS(train_rbm(init, data, cfg), doctest::Contains("epoch"),
                             NumericError);
    }
    SUBCASE("exact-gradient likelihood ascent is monotone at lr 0.01") {
        Matrix data = Matrix::from_rows(
            {{0, 0, 0, 0}, {1, 1, 1, 1}, {1, 1, 0, 0}, {0, 0, 1, 1}});
        TrainingConfig cfg;
        cfg.learning_rate = 0.01;
        cfg.momentum = 1.0;
        cfg.epochs = 1;
        cfg.batch_size = 4;
        cfg.sampler.kind = SamplerKind::Exact;
        RbmParams p = RbmParams::random_init(4, 3, UnitKind::Bernoulli, 18);
        auto mean_ll = [&](const RbmParams& params) {
            double ll = 0.0;
            for (std::size_t r = 0; r < data.rows(); ++r) {
                std::vector<double> v(4);
                for (std::size_t c = 0; c < 4; ++c) v[c] = data(r, c);
                ll += std::log(marginal_visible(params, v));
            }
            return ll / 4.0;
        };
        double prev = mean_ll(p);
        for (int epoch = 0; epoch < 40; ++epoch) {
            p = train_rbm(p, data, cfg).params;
            const double cur = mean_ll(p);
            CHECK(cur >= prev - 1e-9);
            prev = cur;
        }
    }
}

TEST_CASE("train_dbn") {
    SUBCASE("a one-layer spec reduces to train_rbm") {
        Matrix data(12, 3);
        Rng rng(20);
        for (double& x : data.values()) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
        TrainingConfig cfg;
        cfg.epochs = 4;
        cfg.batch_size = 6;
        cfg.rng_seed = 21;
        cfg.sampler.kind = SamplerKind::Cd;
        DbnSpec spec;
        spec.input_dim = 3;
        spec.input_kind = UnitKind::Bernoulli;
        spec.hidden_sizes = {2};
        const auto dbn = train_dbn(spec, data, {cfg});
        const auto direct =
            train_rbm(RbmParams::random_init(3, 2, UnitKind::Bernoulli, 21), data, cfg);
        CHECK(dbn.model.layers.size() == 1);
        CHECK(dbn.model.layers[0].weights.values() == direct.params.weights.values());
        CHECK(dbn.curves[0].points == direct.curve.points);
    }
    SUBCASE("28-15-8 architecture yields 8-column abstractions") {
        Matrix data(40, 28);
        Rng rng(22);
        for (double& x : data.values()) x = rng.normal();
        DbnSpec spec;
        spec.input_dim = 28;
        spec.input_kind = UnitKind::Gaussian;
        spec.hidden_sizes = {15, 8};
        TrainingConfig g;
        g.learning_rate = 0.001;
        g.epochs = 2;
        g.rng_seed = 23;
        TrainingConfig b;
        b.learning_rate = 0.01;
        b.epochs = 2;
        b.rng_seed = 24;
        const auto dbn = train_dbn(spec, data, {g, b});
        const Matrix out = dbn_forward(dbn.model, data);
        CHECK(out.cols() == 8);
        CHECK(dbn.curves.size() == 2);
    }
    SUBCASE("52-26-20 architecture yields 20-column abstractions") {
        Matrix data(30, 52);
        Rng rng(25);
        for (double& x : data.values()) x = rng.normal();
        DbnSpec spec;
        spec.input_dim = 52;
        spec.input_kind = UnitKind::Gaussian;
        spec.hidden_sizes = {26, 20};
        TrainingConfig g;
        g.learning_rate = 0.001;
        g.epochs = 1;
        g.rng_seed = 26;
        TrainingConfig b;
        b.learning_rate = 0.01;
        b.epochs = 1;
        b.rng_seed = 27;
        const auto dbn = train_dbn(spec, data, {g, b});
        CHECK(dbn_forward(dbn.model, data).cols() == 20);
    }
    SUBCASE("greedy stacking: layer 2 trains on layer 1's forward output") {
        Matrix data(16, 4);
        Rng rng(28);
        for (double& x : data.values()) x = rng.bernoulli(0.4) ? 1.0 : 0.0;
        DbnSpec spec;
        spec.input_dim = 4;
        spec.input_kind = UnitKind::Bernoulli;
        spec.hidden_sizes = {3, 2};
        TrainingConfig c1;
        c1.epochs = 3;
        c1.rng_seed = 29;
        c1.sampler.kind = SamplerKind::Cd;
        TrainingConfig c2 = c1;
        c2.rng_seed = 30;
        const auto dbn = train_dbn(spec, data, {c1, c2});
        // Recompute layer 2's training independently from layer 1's output.
        const Matrix y1 = forward_layer(dbn.model.layers[0], data);
        const auto layer2 =
            train_rbm(RbmParams::random_init(3, 2, UnitKind::Bernoulli, 30), y1, c2);
        CHECK(dbn.model.layers[1].weights.values() == layer2.params.weights.values());
        CHECK(dbn.model.layers[1].hidden_bias == layer2.params.hidden_bias);
    }
    SUBCASE("stochastic forward sampling produces binary inter-layer data") {
        Matrix data(10, 3);
        Rng rng(31);
        for (double& x : data.values()) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
        DbnSpec spec;
        spec.input_dim = 3;
        spec.input_kind = UnitKind::Bernoulli;
        spec.hidden_sizes = {2, 2};
        TrainingConfig c;
        c.epochs = 1;
        c.rng_seed = 32;
        c.forward_sampling = true;
        c.sampler.kind = SamplerKind::Cd;
        CHECK_NOTHROW(train_dbn(spec, data, {c, c}));
    }
}

TEST_CASE("dbn_forward") {
    SUBCASE("zero models output 0.5 regardless of input") {
        DbnModel model;
        model.layers = {RbmParams::zeros(3, 2), RbmParams::zeros(2, 2)};
        const Matrix out = dbn_forward(model, Matrix::from_rows({{5.0, -3.0, 2.0}}));
        for (double x : out.values()) CHECK(x == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("outputs bounded in (0,1)") {
        DbnModel model;
        model.layers = {testutil::random_rbm(3, 4, 33, 2.0), testutil::random_rbm(4, 2, 34, 2.0)};
        model.layers[0].visible_kind = UnitKind::Gaussian;
        Matrix data(5, 3);
        Rng rng(35);
        for (double& x : data.values()) x = 3.0 * rng.normal();
        const Matrix out = dbn_forward(model, data);
        for (double x : out.values()) {
            CHECK(x > 0.0);
            CHECK(x < 1.0);
        }
    }
    SUBCASE("single row equals the matching row of a batched call") {
        DbnModel model;
        model.layers = {testutil::random_rbm(3, 3, 36), testutil::random_rbm(3, 2, 37)};
        Matrix data(4, 3);
        Rng rng(38);
        for (double& x : data.values()) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
        const Matrix batched = dbn_forward(model, data);
        const Matrix single = dbn_forward(model, data.slice_rows(2, 3));
        for (std::size_t c = 0; c < 2; ++c)
            CHECK(single(0, c) == doctest::Approx(batched(2, c)).epsilon(1e-15));
    }
    SUBCASE("layer adjacency is validated") {
        DbnModel model;
        model.layers = {RbmParams::zeros(3, 2), RbmParams::zeros(3, 2)};
        CHECK_THROWS_AS(model.validate(), DimensionError);
    }
}

TEST_CASE("loss curves trend down on a separable toy dataset") {
    // Two clusters of binary patterns; CD-1 training should reduce the
    // reconstruction loss with only occasional non-monotone epochs.
    Matrix data(40, 4);
    for (std::size_t r = 0; r < 40; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            data(r, c) = (r % 2 == 0) == (c < 2) ? 1.0 : 0.0;
    TrainingConfig cfg;
    cfg.learning_rate = 0.2;
    cfg.epochs = 40;
    cfg.batch_size = 8;
    cfg.rng_seed = 40;
    cfg.sampler.kind = SamplerKind::Cd;
    const auto result =
        train_rbm(RbmParams::random_init(4, 3, UnitKind::Bernoulli, 40), data, cfg);
    std::size_t increases = 0;
    for (std::size_t i = 1; i < result.curve.points.size(); ++i)
        if (result.curve.points[i].second > result.curve.points[i - 1].second) ++increases;
    CHECK(increases <= result.curve.points.size() / 10);
    CHECK(result.curve.points.back().second < result.curve.points.front().second);
}
