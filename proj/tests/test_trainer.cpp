#include <doctest.h>

#include <cmath>

#include "camo/error.hpp"
#include "camo/synth.hpp"
#include "camo/trainer.hpp"
#include "support.hpp"

using namespace camo;

namespace {

constexpr int kSize = 32;

std::vector<FaceRecord> tiny_records(int n, std::uint64_t seed)
{
    synth::CorpusSpec spec;
    spec.size = kSize;
    spec.train_reals = n;
    spec.test_reals = 0;
    spec.seed = seed;
    return synth::make_records(spec, Split::train);
}

DetectorHandle toy_detector(std::uint64_t seed = 3)
{
    nn::NetSpec spec{3, {8, 8}, 1, 0.05f, 0.0f};
    return DetectorHandle(nn::ConvNet(spec, seed), "toy", nlohmann::json::object(), kSize);
}

TrainConfig quick_config()
{
    TrainConfig c;
    c.max_steps = 3;
    c.batch = 2;
    c.checkpoint_every = 2;
    c.visual_downsample = 2;
    return c;
}

}  // namespace

TEST_CASE("detector spoofing loss")
{
    CHECK(loss_ds(1.0) == 0.0);
    CHECK(loss_ds(0.5) == doctest::Approx(-0.6931471805599453).epsilon(1e-12));
    CHECK(loss_ds(0.0) == doctest::Approx(std::log(1e-6)));
    CHECK(loss_ds(0.0, 1e-3) == doctest::Approx(std::log(1e-3)));
}

TEST_CASE("visual-constraint loss")
{
    std::array<double, kHeadCount> h;
    h.fill(0.5);
    CHECK(loss_vc(h) == doctest::Approx(-0.6931471805599453).epsilon(1e-12));

    // Distortion heads near 1, blend heads near their floor: large and positive.
    std::array<double, kHeadCount> strong{1.0, 0.5, 1.0, 1.0, 0.0, 0.0};
    CHECK(loss_vc(strong) == doctest::Approx(-2.0 * std::log(1e-6)));

    // mu never enters the loss.
    std::array<double, kHeadCount> other = h;
    other[head_index(Head::MuGn)] = 0.9;
    CHECK(loss_vc(other) == loss_vc(h));

    SUBCASE("analytic gradient agrees with central differences")
    {
        Rng rng(6);
        for (int trial = 0; trial < 50; ++trial) {
            std::array<double, kHeadCount> x;
            for (double& v : x) v = rng.uniform(0.05, 0.95);
            const auto g = loss_vc_grad(x);
            for (int k = 0; k < kHeadCount; ++k) {
                auto up = x, down = x;
                up[static_cast<std::size_t>(k)] += 1e-6;
                down[static_cast<std::size_t>(k)] -= 1e-6;
                const double fd = (loss_vc(up) - loss_vc(down)) / 2e-6;
                CHECK(g[static_cast<std::size_t>(k)] == doctest::Approx(fd).epsilon(1e-6));
            }
        }
    }
}

TEST_CASE("penalty closed forms")
{
    CHECK(penalty(0.0, 0.0, 1.0) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(penalty(0.0, 0.0, 0.0) == doctest::Approx(1.6487212707001282).epsilon(1e-12));
    CHECK(penalty(-1e9, 1e9, 1.0) == doctest::Approx(-1.718281828459045).epsilon(1e-12));
}

TEST_CASE("generator visual loss")
{
    CHECK(generator_visual_loss(1.0) == 0.0);
    CHECK(generator_visual_loss(0.5) == doctest::Approx(0.6931471805599453));
    CHECK(std::isfinite(generator_visual_loss(0.0)));
}

TEST_CASE("reinforcement update on a two-parameter toy is exact")
{
    // Toy generator: heads h = (a, b) pass straight through, L_vc = log a + log b.
    std::array<double, 2> theta{0.3, 0.7};
    const std::array<double, 2> grad{1.0 / theta[0], 1.0 / theta[1]};
    const double eta = 1e-2;
    const double p = penalty(std::log(0.4), 0.25, 0.5);
    const std::array<double, 2> expected{theta[0] - eta * p * grad[0], theta[1] - eta * p * grad[1]};
    rl_update(theta, grad, eta, p);
    CHECK(std::abs(theta[0] - expected[0]) <= 1e-10);
    CHECK(std::abs(theta[1] - expected[1]) <= 1e-10);

    SUBCASE("a zero penalty leaves the parameters unchanged")
    {
        std::array<double, 2> t{0.3, 0.7};
        rl_update(t, grad, eta, 0.0);
        CHECK(t[0] == 0.3);
        CHECK(t[1] == 0.7);
    }
}

TEST_CASE("generator step in exact mode is theta - eta P grad")
{
    const auto recs = tiny_records(1, 4);
    const FaceRecord* batch[] = {&recs[0]};
    const DetectorHandle d = toy_detector();
    TrainConfig cfg;
    cfg.mode = UpdateMode::exact;
    cfg.orientation = Orientation::literal;
    cfg.mu_pull = 0.0;
    cfg.eta = 0.5;

    GeneratorModel g(GeneratorModel::desk_backbone(), ParamRanges{}, 11);
    const auto before = g.net().flat_params();

    // Reference gradient of L_vc at the starting weights.
    GeneratorModel probe = g;
    const auto h = probe.heads(recs[0].image);
    probe.net().zero_grad();
    probe.backward_heads(std::vector<std::array<double, kHeadCount>>{loss_vc_grad(h)});
    std::vector<float> grad;
    for (const auto& p : probe.net().params()) grad.insert(grad.end(), p.grad->begin(), p.grad->end());

    nn::Optimizer opt(nn::OptimizerKind::sgd, cfg.eta);
    const StepOutput out = generator_update_step(g, batch, nullptr, d, cfg, opt, 5, 0);
    const double pen = out.record.penalty;
    CHECK(pen == doctest::Approx(std::exp(1.0 / (1.0 + std::exp(-out.record.l_ds)))));
    const auto after = g.net().flat_params();
    REQUIRE(after.size() == grad.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
        const double expected = before[i] - cfg.eta * pen * grad[i];
        REQUIRE(std::abs(after[i] - expected) <= 1e-6 * std::max(1.0, std::abs(expected)));
    }
}

TEST_CASE("penalty sign decides the direction of the visual-constraint loss")
{
    const auto recs = tiny_records(1, 9);
    const FaceRecord* batch[] = {&recs[0]};
    const DetectorHandle d = toy_detector();
    VisualDiscriminator::Spec vs;
    vs.downsample = 2;
    const VisualDiscriminator v(vs, 2, 1e-3);

    auto delta_lvc = [&](Orientation o, double lambda, double* pen) {
        TrainConfig cfg;
        cfg.mode = UpdateMode::exact;
        cfg.orientation = o;
        cfg.mu_pull = 0.0;
        cfg.eta = 1e-3;
        cfg.lambda = lambda;
        GeneratorModel g(GeneratorModel::desk_backbone(), ParamRanges{}, 21);
        const double l0 = loss_vc(g.heads(recs[0].image));
        nn::Optimizer opt(nn::OptimizerKind::sgd, cfg.eta);
        *pen = generator_update_step(g, batch, &v, d, cfg, opt, 1, 0).record.penalty;
        return loss_vc(g.heads(recs[0].image)) - l0;
    };

    double pen = 0.0;
    SUBCASE("literal orientation follows the update rule as written")
    {
        CHECK(delta_lvc(Orientation::literal, 0.0, &pen) < 0.0);
        CHECK(pen > 0.0);
        CHECK(delta_lvc(Orientation::literal, 10.0, &pen) > 0.0);
        CHECK(pen < 0.0);
    }
    SUBCASE("corrective orientation flips both cases")
    {
        CHECK(delta_lvc(Orientation::corrective, 0.0, &pen) > 0.0);
        CHECK(pen > 0.0);
        CHECK(delta_lvc(Orientation::corrective, 10.0, &pen) < 0.0);
        CHECK(pen < 0.0);
    }
}

TEST_CASE("a spoofed detector with lambda 0 makes one literal step descend")
{
    const auto recs = tiny_records(1, 12);
    const FaceRecord* batch[] = {&recs[0]};
    // Bias the detector hard towards "fake" so p_real is at its floor.
    nn::ConvNet net(nn::NetSpec{3, {8, 8}, 1, 0.05f, 0.0f}, 3);
    auto flat = net.flat_params();
    flat.back() = -200.0f;
    net.set_flat_params(flat);
    const DetectorHandle d(std::move(net), "fake-sayer", nlohmann::json::object(), kSize);

    TrainConfig cfg;
    cfg.mode = UpdateMode::exact;
    cfg.orientation = Orientation::literal;
    cfg.lambda = 0.0;
    cfg.mu_pull = 0.0;
    cfg.eta = 1e-3;
    GeneratorModel g(GeneratorModel::desk_backbone(), ParamRanges{}, 8);
    const double before = loss_vc(g.heads(recs[0].image));
    nn::Optimizer opt(nn::OptimizerKind::sgd, cfg.eta);
    const auto out = generator_update_step(g, batch, nullptr, d, cfg, opt, 1, 0);
    CHECK(out.record.l_ds == doctest::Approx(std::log(1e-6)));
    CHECK(out.record.penalty == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(loss_vc(g.heads(recs[0].image)) < before);
}

TEST_CASE("training runs")
{
    const auto train = tiny_records(6, 1);
    const auto val = tiny_records(4, 2);
    const DetectorHandle d = toy_detector();
    const auto hash = d.param_hash();

    SUBCASE("zero steps return the initial generator and an empty log")
    {
        TrainConfig cfg = quick_config();
        cfg.max_steps = 0;
        const TrainResult r = train_camgan(train, val, d, cfg, 0.0);
        CHECK(r.log.empty());
        CHECK(r.selected_step == 0);
        GeneratorModel fresh(GeneratorModel::desk_backbone(), ParamRanges{}, mix_seed(cfg.seed, 0x6e));
        fresh.set_initial_heads(cfg.init_heads);
        CHECK(r.generator.net().flat_params() == fresh.net().flat_params());
    }
    SUBCASE("same seed, same records")
    {
        const TrainConfig cfg = quick_config();
        std::vector<nlohmann::json> streamed;
        const TrainResult a =
            train_camgan(train, val, d, cfg, 0.0, [&](const TrainLogRecord& r) { streamed.push_back(r.to_json()); });
        const TrainResult b = train_camgan(train, val, d, cfg, 0.0);
        REQUIRE(a.log.size() == 3);
        REQUIRE(streamed.size() == 3);
        for (std::size_t i = 0; i < a.log.size(); ++i) {
            CHECK(a.log[i].step == static_cast<int>(i) + 1);
            CHECK(a.log[i].to_json().dump() == b.log[i].to_json().dump());
            CHECK(a.log[i].to_json() == streamed[i]);
            const auto j = a.log[i].to_json();
            for (const char* k : {"l_ds", "l_vi", "l_vc", "penalty", "p_real"}) CHECK(std::isfinite(j[k].get<double>()));
        }
        CHECK(a.generator.net().flat_params() == b.generator.net().flat_params());
        CHECK(d.param_hash() == hash);

        TrainConfig other = cfg;
        other.seed = 2;
        const TrainResult c = train_camgan(train, val, d, other, 0.0);
        CHECK(c.log[0].to_json().dump() != a.log[0].to_json().dump());
    }
    SUBCASE("visual discriminator disabled")
    {
        TrainConfig cfg = quick_config();
        cfg.visual_enabled = false;
        const TrainResult r = train_camgan(train, val, d, cfg, 0.0);
        CHECK(r.log.size() == 3);
        for (const auto& rec : r.log) CHECK(rec.l_vi == 0.0);
    }
    SUBCASE("an untrained detector is refused by the gate")
    {
        CHECK_THROWS_AS(train_camgan(train, val, d, quick_config(), 0.9), PreconditionError);
    }
    SUBCASE("empty splits are refused")
    {
        CHECK_THROWS_AS(train_camgan({}, val, d, quick_config(), 0.0), PreconditionError);
        CHECK_THROWS_AS(train_camgan(train, {}, d, quick_config(), 0.0), PreconditionError);
    }
}

TEST_CASE("training configuration")
{
    const TrainConfig def;
    CHECK_NOTHROW(def.validate());
    const TrainConfig back = TrainConfig::from_json(def.to_json());
    CHECK(back.to_json() == def.to_json());

    CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"etaa", 1.0}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"mode", "fast"}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json{{"eta", "big"}}), ConfigError);
    CHECK_THROWS_AS(TrainConfig::from_json(nlohmann::json::array()), ConfigError);

    TrainConfig bad;
    bad.eta = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.lambda = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.eps_log = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = TrainConfig{};
    bad.init_heads[2] = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("log record JSON round trip")
{
    TrainLogRecord r;
    r.step = 7;
    r.l_ds = -0.25;
    r.l_vi = 0.5;
    r.l_vc = -1.5;
    r.penalty = 0.75;
    r.p_real = 0.8;
    r.visual_loss = 1.25;
    r.param_means = {0.01, 0.0, 1.5, 3.0, 8.0, 17.0};
    const TrainLogRecord back = TrainLogRecord::from_json(r.to_json());
    CHECK(back.to_json() == r.to_json());
}
