#include <doctest.h>

#include <cmath>

#include "camo/error.hpp"
#include "camo/nn.hpp"
#include "support.hpp"

using namespace camo;

namespace {

// Weighted sum of logits, so every output gets a distinct upstream gradient.
double objective(nn::ConvNet& net, const nn::Tensor& x, const std::vector<float>& w)
{
    const nn::Tensor y = net.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.data.size(); ++i) s += static_cast<double>(w[i]) * y.data[i];
    return s;
}

void check_gradients(nn::NetSpec spec)
{
    nn::ConvNet net(spec, 77);
    Rng rng(5);
    const ImageF a = testing::random_image(rng, 16, 16);
    const ImageF b = testing::random_image(rng, 16, 16);
    const ImageF* imgs[] = {&a, &b};
    const nn::Tensor x = nn::to_batch(imgs);
    std::vector<float> w(static_cast<std::size_t>(2 * spec.outputs));
    for (float& v : w) v = static_cast<float>(rng.normal());

    net.forward(x);
    net.zero_grad();
    const nn::Tensor dx = net.backward(w, true);
    auto params = net.params();

    int ok = 0, total = 0;
    for (int s = 0; s < 120; ++s) {
        nn::ParamRef& p = params[rng.below(params.size())];
        const std::size_t i = rng.below(p.value->size());
        const float keep = (*p.value)[i];
        (*p.value)[i] = keep + 1e-3f;
        const double up = objective(net, x, w);
        (*p.value)[i] = keep - 1e-3f;
        const double down = objective(net, x, w);
        (*p.value)[i] = keep;
        const double fd = (up - down) / 2e-3;
        const double an = (*p.grad)[i];
        ok += std::abs(fd - an) <= 2e-2 * std::max({std::abs(fd), std::abs(an), 1e-2}) ? 1 : 0;
        ++total;
    }
    CHECK(static_cast<double>(ok) / total >= 0.95);

    ok = 0;
    total = 0;
    nn::Tensor xp = x;
    for (int s = 0; s < 60; ++s) {
        const std::size_t i = rng.below(xp.data.size());
        const float keep = xp.data[i];
        xp.data[i] = keep + 1e-3f;
        const double up = objective(net, xp, w);
        xp.data[i] = keep - 1e-3f;
        const double down = objective(net, xp, w);
        xp.data[i] = keep;
        const double fd = (up - down) / 2e-3;
        const double an = dx.data[i];
        ok += std::abs(fd - an) <= 2e-2 * std::max({std::abs(fd), std::abs(an), 1e-2}) ? 1 : 0;
        ++total;
    }
    CHECK(static_cast<double>(ok) / total >= 0.95);
}

}  // namespace

TEST_CASE("backprop matches finite differences with average pooling")
{
    check_gradients(nn::NetSpec{3, {4, 6}, 2, 0.05f, 0.0f});
}

TEST_CASE("backprop matches finite differences with soft-min pooling")
{
    check_gradients(nn::NetSpec{3, {4, 6}, 1, 0.05f, 3.0f});
}

TEST_CASE("soft-min pooling lies between the mean and the minimum of the location logits")
{
    // A 1x1 input leaves a single location, where soft-min equals the plain head.
    nn::ConvNet soft(nn::NetSpec{3, {4}, 1, 0.05f, 3.0f}, 1);
    nn::ConvNet avg(nn::NetSpec{3, {4}, 1, 0.05f, 0.0f}, 1);
    const ImageF one(1, 1, 0.3);
    CHECK(soft.forward(nn::to_batch(one)).data[0] == doctest::Approx(avg.forward(nn::to_batch(one)).data[0]).epsilon(1e-5));

    Rng rng(3);
    const ImageF img = testing::random_image(rng, 16, 16);
    CHECK(soft.forward(nn::to_batch(img)).data[0] <= avg.forward(nn::to_batch(img)).data[0] + 1e-5f);
}

TEST_CASE("network identifiers round trip")
{
    for (const nn::NetSpec& s : {nn::NetSpec{3, {16, 32, 64, 64}, 1, 0.05f, 0.0f},
                                 nn::NetSpec{3, {16, 32, 64, 64}, 1, 0.05f, 3.0f},
                                 nn::NetSpec{3, {8}, 6, 0.1f, 0.0f}}) {
        CHECK(nn::parse_net_id(s.id()) == s);
    }
    CHECK_THROWS(nn::parse_net_id("resnet50"));
}

TEST_CASE("optimizers")
{
    nn::FloatBuffer v{1.0f, -2.0f};
    nn::FloatBuffer g{0.5f, -0.25f};
    std::vector<nn::ParamRef> refs{{"p", &v, &g}};

    SUBCASE("sgd is exactly theta - lr * g")
    {
        nn::Optimizer opt(nn::OptimizerKind::sgd, 0.1);
        opt.step(refs);
        CHECK(v[0] == doctest::Approx(0.95));
        CHECK(v[1] == doctest::Approx(-1.975));
    }
    SUBCASE("rmsprop first step is lr * g / (sqrt((1 - a) g^2) + eps)")
    {
        nn::Optimizer opt(nn::OptimizerKind::rmsprop, 0.01, 0.99);
        opt.step(refs);
        CHECK(v[0] == doctest::Approx(1.0 - 0.01 / std::sqrt(0.01)).epsilon(1e-5));
        CHECK(v[1] == doctest::Approx(-2.0 + 0.01 / std::sqrt(0.01)).epsilon(1e-5));
    }
    SUBCASE("adam first step moves every coordinate by lr")
    {
        nn::Optimizer opt(nn::OptimizerKind::adam, 0.01, 0.999);
        opt.step(refs);
        CHECK(v[0] == doctest::Approx(0.99).epsilon(1e-5));
        CHECK(v[1] == doctest::Approx(-1.99).epsilon(1e-5));
    }
}

TEST_CASE("parameter hash tracks the weights")
{
    nn::ConvNet net(nn::NetSpec{3, {4}, 1, 0.05f, 0.0f}, 3);
    const auto h = net.param_hash();
    auto flat = net.flat_params();
    CHECK(net.param_hash() == h);
    flat[0] += 1.0f;
    net.set_flat_params(flat);
    CHECK(net.param_hash() != h);
}
