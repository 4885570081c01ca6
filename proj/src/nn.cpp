#include "camo/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include <Eigen/Core>

#include "camo/error.hpp"
#include "camo/random.hpp"

namespace camo::nn {

namespace {

using MatR = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

constexpr int kK = 3;
constexpr int kStride = 2;
constexpr int kPad = 1;

int out_dim(int in) noexcept { return (in + 2 * kPad - kK) / kStride + 1; }

void im2col(const float* in, int c, int h, int w, float* cols)
{
    const int ho = out_dim(h);
    const int wo = out_dim(w);
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < kK; ++ky) {
            for (int kx = 0; kx < kK; ++kx) {
                float* row = cols + static_cast<std::size_t>((ch * kK + ky) * kK + kx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    const int iy = y * kStride - kPad + ky;
                    for (int x = 0; x < wo; ++x) {
                        const int ix = x * kStride - kPad + kx;
                        row[y * wo + x] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                              ? in[(static_cast<std::size_t>(ch) * h + iy) * w + ix]
                                              : 0.0f;
                    }
                }
            }
        }
    }
}

void col2im(const float* cols, int c, int h, int w, float* out)
{
    const int ho = out_dim(h);
    const int wo = out_dim(w);
    std::fill(out, out + static_cast<std::size_t>(c) * h * w, 0.0f);
    for (int ch = 0; ch < c; ++ch) {
        for (int ky = 0; ky < kK; ++ky) {
            for (int kx = 0; kx < kK; ++kx) {
                const float* row = cols + static_cast<std::size_t>((ch * kK + ky) * kK + kx) * ho * wo;
                for (int y = 0; y < ho; ++y) {
                    const int iy = y * kStride - kPad + ky;
                    if (iy < 0 || iy >= h) continue;
                    for (int x = 0; x < wo; ++x) {
                        const int ix = x * kStride - kPad + kx;
                        if (ix < 0 || ix >= w) continue;
                        out[(static_cast<std::size_t>(ch) * h + iy) * w + ix] += row[y * wo + x];
                    }
                }
            }
        }
    }
}

}  // namespace

Tensor to_batch(std::span<const ImageF* const> images)
{
    if (images.empty()) {
        throw DomainError("to_batch: empty image list");
    }
    const int h = images[0]->height();
    const int w = images[0]->width();
    Tensor t(static_cast<int>(images.size()), 3, h, w);
    for (int i = 0; i < t.n; ++i) {
        const ImageF& img = *images[static_cast<std::size_t>(i)];
        if (img.height() != h || img.width() != w) {
            throw DomainError("to_batch: images differ in size");
        }
        for (int ch = 0; ch < 3; ++ch) {
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    t.at(i, ch, y, x) = static_cast<float>((img.at(y, x, ch) - 0.5) * kInputScale);
                }
            }
        }
    }
    return t;
}

Tensor to_batch(const ImageF& image)
{
    const ImageF* p = &image;
    return to_batch(std::span<const ImageF* const>(&p, 1));
}

std::string NetSpec::id() const
{
    std::ostringstream os;
    os << "cnn-s2k3:in" << in_channels << ":";
    for (std::size_t i = 0; i < channels.size(); ++i) {
        os << (i ? "-" : "") << channels[i];
    }
    os << ":out" << outputs << ":leak" << leak;
    if (softmin > 0.0f) {
        os << ":softmin" << softmin;
    }
    return os.str();
}

NetSpec parse_net_id(const std::string& id)
{
    NetSpec s;
    s.channels.clear();
    int in = 0, out = 0;
    float leak = 0.0f;
    char chans[256] = {0};
    float softmin = 0.0f;
    const int fields =
        std::sscanf(id.c_str(), "cnn-s2k3:in%d:%255[0-9-]:out%d:leak%f:softmin%f", &in, chans, &out, &leak, &softmin);
    if (fields != 4 && fields != 5) {
        throw ModelStateError("unrecognized backbone id '" + id + "'");
    }
    s.softmin = softmin;
    s.in_channels = in;
    s.outputs = out;
    s.leak = leak;
    std::stringstream ss(chans);
    std::string tok;
    while (std::getline(ss, tok, '-')) {
        s.channels.push_back(std::stoi(tok));
    }
    if (s.id() != id) {
        throw ModelStateError("backbone id does not round-trip: '" + id + "'");
    }
    return s;
}

ConvNet::ConvNet(NetSpec spec, std::uint64_t init_seed) : spec_(std::move(spec))
{
    if (spec_.channels.empty() || spec_.outputs <= 0) {
        throw ConfigError("network needs at least one conv block and one output");
    }
    Rng rng(init_seed, 0x4e4e);
    int in = spec_.in_channels;
    for (int out : spec_.channels) {
        Conv c;
        c.in = in;
        c.out = out;
        const std::size_t fan_in = static_cast<std::size_t>(in) * kK * kK;
        c.weight.resize(static_cast<std::size_t>(out) * fan_in);
        const double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (float& v : c.weight) {
            v = static_cast<float>(rng.normal() * std);
        }
        c.bias.assign(static_cast<std::size_t>(out), 0.0f);
        c.dweight.assign(c.weight.size(), 0.0f);
        c.dbias.assign(c.bias.size(), 0.0f);
        convs_.push_back(std::move(c));
        in = out;
    }
    head_w_.resize(static_cast<std::size_t>(spec_.outputs) * in);
    const double hstd = std::sqrt(1.0 / in);
    for (float& v : head_w_) {
        v = static_cast<float>(rng.normal() * hstd);
    }
    head_b_.assign(static_cast<std::size_t>(spec_.outputs), 0.0f);
    dhead_w_.assign(head_w_.size(), 0.0f);
    dhead_b_.assign(head_b_.size(), 0.0f);
}

Tensor ConvNet::forward(const Tensor& x)
{
    if (x.c != spec_.in_channels) {
        throw DomainError("network expects " + std::to_string(spec_.in_channels) + " input channels");
    }
    input_ = x;
    pre_.assign(convs_.size(), Tensor{});
    acts_.assign(convs_.size(), Tensor{});
    cols_.assign(convs_.size(), {});

    const Tensor* cur = &input_;
    for (std::size_t l = 0; l < convs_.size(); ++l) {
        const Conv& conv = convs_[l];
        const int ho = out_dim(cur->h);
        const int wo = out_dim(cur->w);
        const int krows = conv.in * kK * kK;
        const std::size_t col_size = static_cast<std::size_t>(krows) * ho * wo;
        Tensor& pre = pre_[l];
        Tensor& act = acts_[l];
        pre = Tensor(cur->n, conv.out, ho, wo);
        act = Tensor(cur->n, conv.out, ho, wo);
        cols_[l].assign(col_size * cur->n, 0.0f);
        const float leak = spec_.leak;
        const Tensor& src = *cur;

#pragma omp parallel for schedule(static)
        for (int i = 0; i < src.n; ++i) {
            float* cols = cols_[l].data() + col_size * i;
            im2col(src.sample(i), src.c, src.h, src.w, cols);
            CMapR wmat(conv.weight.data(), conv.out, krows);
            CMapR cmat(cols, krows, ho * wo);
            MapR omat(pre.sample(i), conv.out, ho * wo);
            omat.noalias() = wmat * cmat;
            for (int o = 0; o < conv.out; ++o) {
                omat.row(o).array() += conv.bias[static_cast<std::size_t>(o)];
            }
            float* a = act.sample(i);
            const float* p = pre.sample(i);
            for (std::size_t k = 0; k < pre.sample_size(); ++k) {
                a[k] = p[k] > 0.0f ? p[k] : leak * p[k];
            }
        }
        cur = &act;
    }

    const Tensor& last = acts_.back();
    const int hw = last.h * last.w;
    pooled_.assign(static_cast<std::size_t>(last.n) * last.c, 0.0f);
    for (int i = 0; i < last.n; ++i) {
        for (int ch = 0; ch < last.c; ++ch) {
            const float* a = last.sample(i) + static_cast<std::size_t>(ch) * hw;
            double s = 0.0;
            for (int k = 0; k < hw; ++k) {
                s += a[k];
            }
            pooled_[static_cast<std::size_t>(i) * last.c + ch] = static_cast<float>(s / hw);
        }
    }

    Tensor logits(last.n, spec_.outputs, 1, 1);
    if (spec_.softmin > 0.0f) {
        // Per-location logits pooled by a soft minimum: the output is only as
        // high as the lowest-scoring regions allow.
        const double r = spec_.softmin;
        loc_weights_.assign(static_cast<std::size_t>(last.n) * spec_.outputs * hw, 0.0f);
        std::vector<double> z(static_cast<std::size_t>(hw));
        for (int i = 0; i < last.n; ++i) {
            for (int o = 0; o < spec_.outputs; ++o) {
                std::fill(z.begin(), z.end(), static_cast<double>(head_b_[static_cast<std::size_t>(o)]));
                for (int ch = 0; ch < last.c; ++ch) {
                    const double wv = head_w_[static_cast<std::size_t>(o) * last.c + ch];
                    const float* a = last.sample(i) + static_cast<std::size_t>(ch) * hw;
                    for (int k = 0; k < hw; ++k) {
                        z[static_cast<std::size_t>(k)] += wv * a[k];
                    }
                }
                const double m = *std::min_element(z.begin(), z.end());
                double sum = 0.0;
                float* sw = loc_weights_.data() + (static_cast<std::size_t>(i) * spec_.outputs + o) * hw;
                for (int k = 0; k < hw; ++k) {
                    const double e = std::exp(-r * (z[static_cast<std::size_t>(k)] - m));
                    sw[k] = static_cast<float>(e);
                    sum += e;
                }
                for (int k = 0; k < hw; ++k) {
                    sw[k] = static_cast<float>(sw[k] / sum);
                }
                logits.at(i, o, 0, 0) = static_cast<float>(m - std::log(sum / hw) / r);
            }
        }
        return logits;
    }
    for (int i = 0; i < last.n; ++i) {
        for (int o = 0; o < spec_.outputs; ++o) {
            double z = head_b_[static_cast<std::size_t>(o)];
            for (int ch = 0; ch < last.c; ++ch) {
                z += static_cast<double>(head_w_[static_cast<std::size_t>(o) * last.c + ch]) *
                     pooled_[static_cast<std::size_t>(i) * last.c + ch];
            }
            logits.at(i, o, 0, 0) = static_cast<float>(z);
        }
    }
    return logits;
}

Tensor ConvNet::backward(std::span<const float> dlogits, bool want_input_grad)
{
    const Tensor& last = acts_.back();
    const int n = last.n;
    if (dlogits.size() != static_cast<std::size_t>(n) * spec_.outputs) {
        throw DomainError("backward: gradient size does not match the last forward batch");
    }
    const int cl = last.c;
    const int hw = last.h * last.w;

    Tensor dact(n, cl, last.h, last.w);
    if (spec_.softmin > 0.0f) {
        for (int i = 0; i < n; ++i) {
            for (int o = 0; o < spec_.outputs; ++o) {
                const float g = dlogits[static_cast<std::size_t>(i) * spec_.outputs + o];
                dhead_b_[static_cast<std::size_t>(o)] += g;
                const float* sw = loc_weights_.data() + (static_cast<std::size_t>(i) * spec_.outputs + o) * hw;
                for (int ch = 0; ch < cl; ++ch) {
                    const float* a = last.sample(i) + static_cast<std::size_t>(ch) * hw;
                    float* d = dact.sample(i) + static_cast<std::size_t>(ch) * hw;
                    const float wv = head_w_[static_cast<std::size_t>(o) * cl + ch];
                    double acc = 0.0;
                    for (int k = 0; k < hw; ++k) {
                        acc += static_cast<double>(sw[k]) * a[k];
                        d[k] += g * sw[k] * wv;
                    }
                    dhead_w_[static_cast<std::size_t>(o) * cl + ch] += static_cast<float>(g * acc);
                }
            }
        }
    } else {
        std::vector<float> dpooled(static_cast<std::size_t>(n) * cl, 0.0f);
        for (int i = 0; i < n; ++i) {
            for (int o = 0; o < spec_.outputs; ++o) {
                const float g = dlogits[static_cast<std::size_t>(i) * spec_.outputs + o];
                dhead_b_[static_cast<std::size_t>(o)] += g;
                for (int ch = 0; ch < cl; ++ch) {
                    dhead_w_[static_cast<std::size_t>(o) * cl + ch] +=
                        g * pooled_[static_cast<std::size_t>(i) * cl + ch];
                    dpooled[static_cast<std::size_t>(i) * cl + ch] += g * head_w_[static_cast<std::size_t>(o) * cl + ch];
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int ch = 0; ch < cl; ++ch) {
                const float g = dpooled[static_cast<std::size_t>(i) * cl + ch] / static_cast<float>(hw);
                float* d = dact.sample(i) + static_cast<std::size_t>(ch) * hw;
                std::fill(d, d + hw, g);
            }
        }
    }
    last_conv_grad_ = dact;

    for (std::size_t li = convs_.size(); li-- > 0;) {
        Conv& conv = convs_[li];
        const Tensor& pre = pre_[li];
        const Tensor& src = li == 0 ? input_ : acts_[li - 1];
        const int krows = conv.in * kK * kK;
        const int ohw = pre.h * pre.w;
        const std::size_t col_size = static_cast<std::size_t>(krows) * ohw;
        const float leak = spec_.leak;

        Tensor dpre(n, conv.out, pre.h, pre.w);
        for (std::size_t k = 0; k < dpre.data.size(); ++k) {
            dpre.data[k] = dact.data[k] * (pre.data[k] > 0.0f ? 1.0f : leak);
        }

        // Weight gradients accumulate in sample order.
        MapR dw(conv.dweight.data(), conv.out, krows);
        for (int i = 0; i < n; ++i) {
            CMapR g(dpre.sample(i), conv.out, ohw);
            CMapR cmat(cols_[li].data() + col_size * i, krows, ohw);
            dw.noalias() += g * cmat.transpose();
            for (int o = 0; o < conv.out; ++o) {
                conv.dbias[static_cast<std::size_t>(o)] += g.row(o).sum();
            }
        }

        const bool need_dinput = li > 0 || want_input_grad;
        if (!need_dinput) {
            break;
        }
        Tensor dsrc(n, src.c, src.h, src.w);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
            FloatBuffer dcols(col_size);
            CMapR wmat(conv.weight.data(), conv.out, krows);
            CMapR g(dpre.sample(i), conv.out, ohw);
            MapR dc(dcols.data(), krows, ohw);
            dc.noalias() = wmat.transpose() * g;
            col2im(dcols.data(), src.c, src.h, src.w, dsrc.sample(i));
        }
        dact = std::move(dsrc);
    }
    return want_input_grad ? dact : Tensor{};
}

void ConvNet::zero_grad()
{
    for (Conv& c : convs_) {
        std::fill(c.dweight.begin(), c.dweight.end(), 0.0f);
        std::fill(c.dbias.begin(), c.dbias.end(), 0.0f);
    }
    std::fill(dhead_w_.begin(), dhead_w_.end(), 0.0f);
    std::fill(dhead_b_.begin(), dhead_b_.end(), 0.0f);
}

std::vector<ParamRef> ConvNet::params()
{
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < convs_.size(); ++i) {
        out.push_back({"conv" + std::to_string(i) + ".weight", &convs_[i].weight, &convs_[i].dweight});
        out.push_back({"conv" + std::to_string(i) + ".bias", &convs_[i].bias, &convs_[i].dbias});
    }
    out.push_back({"head.weight", &head_w_, &dhead_w_});
    out.push_back({"head.bias", &head_b_, &dhead_b_});
    return out;
}

std::size_t ConvNet::param_count() const
{
    std::size_t n = head_w_.size() + head_b_.size();
    for (const Conv& c : convs_) {
        n += c.weight.size() + c.bias.size();
    }
    return n;
}

std::vector<float> ConvNet::flat_params() const
{
    std::vector<float> flat;
    flat.reserve(param_count());
    for (const Conv& c : convs_) {
        flat.insert(flat.end(), c.weight.begin(), c.weight.end());
        flat.insert(flat.end(), c.bias.begin(), c.bias.end());
    }
    flat.insert(flat.end(), head_w_.begin(), head_w_.end());
    flat.insert(flat.end(), head_b_.begin(), head_b_.end());
    return flat;
}

void ConvNet::set_flat_params(std::span<const float> flat)
{
    if (flat.size() != param_count()) {
        throw ModelStateError("parameter vector has " + std::to_string(flat.size()) +
                              " values, network expects " + std::to_string(param_count()));
    }
    std::size_t off = 0;
    auto take = [&](FloatBuffer& dst) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + dst.size()), dst.begin());
        off += dst.size();
    };
    for (Conv& c : convs_) {
        take(c.weight);
        take(c.bias);
    }
    take(head_w_);
    take(head_b_);
}

std::uint64_t ConvNet::param_hash() const
{
    const auto flat = flat_params();
    return hash_floats(flat);
}

double sigmoid(double z) noexcept
{
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double log_sigmoid(double z) noexcept
{
    return z >= 0.0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double alpha, double eps)
    : kind_(kind), lr_(lr), alpha_(alpha), eps_(eps)
{
    if (!(lr > 0.0)) {
        throw ConfigError("learning rate must be positive");
    }
}

void Optimizer::step(std::span<const ParamRef> params)
{
    if (kind_ != OptimizerKind::sgd && sq_.size() != params.size()) {
        sq_.clear();
        mom_.clear();
        for (const ParamRef& p : params) {
            sq_.emplace_back(p.value->size(), 0.0f);
            mom_.emplace_back(p.value->size(), 0.0f);
        }
        steps_ = 0;
    }
    ++steps_;
    const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(alpha_, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto& v = *params[k].value;
        const auto& g = *params[k].grad;
        switch (kind_) {
        case OptimizerKind::sgd:
            for (std::size_t i = 0; i < v.size(); ++i) {
                v[i] = static_cast<float>(v[i] - lr_ * g[i]);
            }
            break;
        case OptimizerKind::rmsprop: {
            auto& s = sq_[k];
            for (std::size_t i = 0; i < v.size(); ++i) {
                s[i] = static_cast<float>(alpha_ * s[i] + (1.0 - alpha_) * static_cast<double>(g[i]) * g[i]);
                v[i] = static_cast<float>(v[i] - lr_ * g[i] / (std::sqrt(static_cast<double>(s[i])) + eps_));
            }
            break;
        }
        case OptimizerKind::adam: {
            auto& s = sq_[k];
            auto& m = mom_[k];
            for (std::size_t i = 0; i < v.size(); ++i) {
                m[i] = static_cast<float>(0.9 * m[i] + 0.1 * g[i]);
                s[i] = static_cast<float>(alpha_ * s[i] + (1.0 - alpha_) * static_cast<double>(g[i]) * g[i]);
                const double mhat = m[i] / bc1;
                const double shat = s[i] / bc2;
                v[i] = static_cast<float>(v[i] - lr_ * mhat / (std::sqrt(shat) + eps_));
            }
            break;
        }
        }
    }
}

std::uint64_t hash_floats(std::span<const float> values) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto* bytes = reinterpret_cast<const unsigned char*>(values.data());
    for (std::size_t i = 0; i < values.size_bytes(); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

}  // namespace camo::nn
