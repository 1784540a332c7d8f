#include <doctest.h>

#include <cmath>

#include "neuroexc/errors.hpp"
#include "neuroexc/lm.hpp"
#include "neuroexc/narx.hpp"
#include "support/generators.hpp"

using namespace neuroexc;

namespace {

// Straight-line evaluation with explicit loops.
double naive_mlp(const Mlp& net, const Eigen::VectorXd& z) {
    double y = net.out_b;
    for (int i = 0; i < net.hidden(); ++i) {
        double a = net.hidden_b(i);
        for (int j = 0; j < net.inputs(); ++j) a += net.hidden_w(i, j) * z(j);
        y += net.out_w(i) * std::tanh(a);
    }
    return y;
}

Dataset random_dataset(testgen::Gen& g, const NarxModel& truth, int n, double noise) {
    Dataset d;
    for (int k = 0; k < n; ++k) {
        Record r;
        r.z = g.regressor();
        r.u = g.uniform(-0.1, 0.1);
        r.y_next = narx_predict(truth, r.z, r.u) + g.uniform(-noise, noise);
        d.records.push_back(r);
    }
    return d;
}

}  // namespace

TEST_SUITE("narx") {
    TEST_CASE("mlp_forward examples") {
        Mlp net = Mlp::zeros(5, kRegressorSize);
        net.out_b = 0.3;
        CHECK(mlp_forward(net, Regressor::Random()) == 0.3);

        Mlp one = Mlp::zeros(1, kRegressorSize);
        one.out_w(0) = 1.0;
        CHECK(mlp_forward(one, Regressor::Random()) == 0.0);

        one.hidden_w(0, 0) = 0.5;
        one.hidden_b(0) = 0.5;
        one.out_w(0) = 2.0;
        one.out_b = 0.5;
        Regressor z = Regressor::Zero();
        z(0) = 1.0;  // pre-activation 1
        CHECK(mlp_forward(one, z) == doctest::Approx(2.0 * std::tanh(1.0) + 0.5).epsilon(1e-15));
        CHECK(mlp_forward(one, z) == doctest::Approx(2.023188).epsilon(1e-6));

        CHECK_THROWS_AS(mlp_forward(one, Eigen::VectorXd::Zero(3)), ConfigError);
    }

    TEST_CASE("narx_predict matches loop evaluation") {
        testgen::for_all(50, 101, [](testgen::Gen& g, int) {
            const auto m = g.model(5, 5);
            const Regressor z = g.regressor();
            const double u = g.uniform(-0.2, 0.2);
            CHECK(std::abs(narx_predict(m, z, u) - (naive_mlp(m.f, z) + naive_mlp(m.g, z) * u)) <= 1e-14);
            CHECK(narx_predict(m, z, 0.0) == mlp_forward(m.f, z));
        });
        NarxModel m{Mlp::zeros(5, kRegressorSize), Mlp::zeros(5, kRegressorSize)};
        m.g.out_b = 0.25;
        CHECK(narx_predict(m, Regressor::Ones(), 2.0) == 0.5);
    }

    TEST_CASE("property: prediction is exactly affine in u") {
        testgen::for_all(200, 102, [](testgen::Gen& g, int) {
            const auto m = g.model(5, 5);
            const Regressor z = g.regressor();
            const double u1 = g.uniform(-1, 1), u2 = g.uniform(-1, 1);
            const double defect =
                narx_predict(m, z, u1 + u2) - narx_predict(m, z, u1) - narx_predict(m, z, u2) + narx_predict(m, z, 0.0);
            CHECK(std::abs(defect) <= 1e-14);
        });
    }

    TEST_CASE("property: tanh saturation bounds the output") {
        testgen::for_all(200, 103, [](testgen::Gen& g, int) {
            const auto m = g.model(5, 5, 3.0);
            const Regressor z = g.regressor() * g.uniform(1, 100);
            CHECK(std::abs(mlp_forward(m.f, z)) <= (m.f.out_w.cwiseAbs().sum() + std::abs(m.f.out_b)) * (1.0 + 1e-12));
        });
    }

    TEST_CASE("flatten layout and round trip") {
        const auto m = testgen::Gen(104).model(5, 5);
        const Eigen::VectorXd theta = flatten(m);
        REQUIRE(theta.size() == 152);
        CHECK(theta(1) == m.f.hidden_w(0, 1));
        CHECK(theta(13) == m.f.hidden_w(1, 0));
        CHECK(theta(65) == m.f.hidden_b(0));
        CHECK(theta(70) == m.f.out_w(0));
        CHECK(theta(75) == m.f.out_b);
        CHECK(theta(76) == m.g.hidden_w(0, 0));
        CHECK(theta(151) == m.g.out_b);
        testgen::for_all(50, 105, [](testgen::Gen& g, int) {
            const int p = g.integer(1, 6), q = g.integer(1, 6);
            const auto model = g.model(p, q);
            const Eigen::VectorXd t = flatten(model);
            CHECK(flatten(unflatten(t, p, q)) == t);
        });
        CHECK_THROWS_AS(unflatten(theta, 5, 4), ConfigError);
    }

    TEST_CASE("weight_jacobian: bias entries") {
        testgen::for_all(20, 106, [](testgen::Gen& g, int) {
            const auto m = g.model(5, 5);
            const double u = g.uniform(-1, 1);
            const Eigen::VectorXd j = weight_jacobian(m, g.regressor(), u);
            CHECK(j(75) == 1.0);
            CHECK(j(151) == u);
        });
    }

    TEST_CASE("property: weight_jacobian matches central differences") {
        double worst = 0.0;
        testgen::for_all(100, 107, [&](testgen::Gen& g, int) {
            const auto m = g.model(5, 5);
            const Regressor z = g.regressor();
            const double u = g.uniform(-0.5, 0.5);
            const Eigen::VectorXd theta = flatten(m);
            const Eigen::VectorXd j = weight_jacobian(m, z, u);
            for (Eigen::Index k = 0; k < theta.size(); ++k) {
                const double h = 1e-6;
                Eigen::VectorXd tp = theta, tm = theta;
                tp(k) += h;
                tm(k) -= h;
                const double fd = (narx_predict(unflatten(tp, 5, 5), z, u) - narx_predict(unflatten(tm, 5, 5), z, u)) /
                                  (tp(k) - tm(k));
                worst = std::max(worst, std::abs(fd - j(k)) / std::max({std::abs(fd), std::abs(j(k)), 1.0}));
            }
        });
        CHECK(worst <= 1e-6);
    }

    TEST_CASE("mse_cost") {
        testgen::Gen g(108);
        const auto m = g.model(5, 5);
        const Dataset exact = random_dataset(g, m, 20, 0.0);
        CHECK(mse_cost(m, exact) == 0.0);

        Dataset one;
        Record r;
        r.y_next = narx_predict(m, r.z, r.u) + 0.2;
        one.records.push_back(r);
        CHECK(mse_cost(m, one) == doctest::Approx(0.02).epsilon(1e-12));

        const Dataset noisy = random_dataset(g, g.model(5, 5), 64, 0.0);
        double sum = 0.0;
        for (const auto& rec : noisy.records) {
            const double e = rec.y_next - (naive_mlp(m.f, rec.z) + naive_mlp(m.g, rec.z) * rec.u);
            sum += e * e;
        }
        CHECK(std::abs(mse_cost(m, noisy) - sum / (2.0 * 64)) <= 1e-14);
        CHECK_THROWS_AS(mse_cost(m, Dataset{}), ConfigError);
    }

    TEST_CASE("random_model is seeded and bounded") {
        const auto a = random_model(5, 5, 7);
        const auto b = random_model(5, 5, 7);
        CHECK(flatten(a) == flatten(b));
        CHECK(flatten(a) != flatten(random_model(5, 5, 8)));
        CHECK(flatten(a).cwiseAbs().maxCoeff() <= 0.5);
    }

    TEST_CASE("weight file round trip") {
        const auto m = testgen::Gen(109).model(5, 5);
        const std::string text = format_weights(m);
        CHECK(text.rfind("narx-v1 p=5 in=13\n", 0) == 0);
        CHECK(flatten(parse_weights(text)) == flatten(m));

        const auto uneven = testgen::Gen(110).model(4, 6);
        const std::string t2 = format_weights(uneven);
        CHECK(t2.rfind("narx-v1 p=4 in=13 q=6\n", 0) == 0);
        CHECK(flatten(parse_weights(t2)) == flatten(uneven));

        const auto path = testgen::tmp_path("roundtrip.weights");
        save_weights(m, path);
        CHECK(flatten(load_weights(path)) == flatten(m));

        CHECK_THROWS_AS(parse_weights("narx-v2 p=5 in=13\n1\n"), ConfigError);
        CHECK_THROWS_AS(parse_weights("narx-v1 p=5 in=13\n1\n2\n"), ConfigError);
        CHECK_THROWS_AS(parse_weights("narx-v1 p=1 in=1 r=2\n"), ConfigError);
    }
}

TEST_SUITE("narx") {
    TEST_CASE("lm_train: zero residual returns immediately") {
        testgen::Gen g(201);
        const auto m = g.model(5, 5);
        const Dataset d = random_dataset(g, m, 50, 0.0);
        const auto result = lm_train(m, d);
        CHECK(result.state.iteration == 0);
        CHECK(result.state.cost_history == std::vector<double>{0.0});
        CHECK(flatten(result.model) == flatten(m));
    }

    TEST_CASE("lm_train: output layers only converge to least squares") {
        testgen::Gen g(202);
        const auto start = g.model(3, 3);
        const Dataset d = random_dataset(g, g.model(3, 3), 200, 0.01);

        // Induced linear features: [tanh(f hidden), 1, u tanh(g hidden), u].
        const int p = 3;
        Eigen::MatrixXd phi(200, 2 * p + 2);
        Eigen::VectorXd y(200);
        for (int k = 0; k < 200; ++k) {
            const auto& r = d.records[static_cast<std::size_t>(k)];
            const Eigen::ArrayXd hf = (start.f.hidden_w * r.z + start.f.hidden_b).array().tanh();
            const Eigen::ArrayXd hg = (start.g.hidden_w * r.z + start.g.hidden_b).array().tanh();
            phi.row(k) << hf.transpose().matrix(), 1.0, r.u * hg.transpose().matrix(), r.u;
            y(k) = r.y_next;
        }
        const Eigen::VectorXd ls = phi.colPivHouseholderQr().solve(y);

        const int nf = start.f.parameter_count();
        LmOptions opt;
        opt.max_iter = 200;
        opt.trainable.assign(static_cast<std::size_t>(start.parameter_count()), false);
        for (int i = 0; i < p + 1; ++i) {
            opt.trainable[static_cast<std::size_t>(nf - p - 1 + i)] = true;
            opt.trainable[static_cast<std::size_t>(start.parameter_count() - p - 1 + i)] = true;
        }
        const auto result = lm_train(start, d, opt);
        const Eigen::VectorXd theta = flatten(result.model);
        Eigen::VectorXd got(2 * p + 2);
        got << theta.segment(nf - p - 1, p + 1), theta.tail(p + 1);
        // The cost is flat to rounding near the optimum, so the parameters
        // only agree to about sqrt(eps) times the conditioning of phi.
        const double ls_cost = 0.5 * (phi * ls - y).squaredNorm() / 200.0;
        CHECK(result.state.cost_history.back() <= ls_cost * (1.0 + 1e-12));
        CHECK((got - ls).lpNorm<Eigen::Infinity>() <= 1e-5);
        // Frozen weights did not move.
        CHECK(theta.head(nf - p - 1) == flatten(start).head(nf - p - 1));
    }

    TEST_CASE("property: accepted costs never increase and mu stays positive") {
        testgen::for_all(5, 203, [](testgen::Gen& g, int) {
            const Dataset d = random_dataset(g, g.model(5, 5), 150, 0.01);
            LmOptions opt;
            opt.max_iter = 30;
            const auto result = lm_train(g.model(5, 5), d, opt);
            const auto& h = result.state.cost_history;
            for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1]);
            CHECK(result.state.mu > 0.0);
            CHECK(h.back() == doctest::Approx(mse_cost(result.model, d)).epsilon(1e-12));
        });
    }

    TEST_CASE("lm_train argument checks") {
        testgen::Gen g(204);
        const auto m = g.model(2, 2);
        CHECK_THROWS_AS(lm_train(m, Dataset{}), ConfigError);
        LmOptions opt;
        opt.max_iter = 0;
        CHECK_THROWS_AS(lm_train(m, random_dataset(g, m, 5, 0.1), opt), ConfigError);
        opt.max_iter = 5;
        opt.trainable = {true};
        CHECK_THROWS_AS(lm_train(m, random_dataset(g, m, 5, 0.1), opt), ConfigError);
    }
}
