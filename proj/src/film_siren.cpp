// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/film_siren.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace occufield {
namespace {

constexpr int kMappingHidden = 256;
constexpr int kMaxWidth = 256;
constexpr Real kLeakySlope = Real(0.2);

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

void apply_affine(std::span<const Real> params, int w_off, int b_off, int rows, int cols,
                  const Real* x, Real* y) {
    for (int r = 0; r < rows; ++r) {
        Real acc = params[std::size_t(b_off + r)];
        const Real* w = params.data() + w_off + std::size_t(r) * std::size_t(cols);
        for (int c = 0; c < cols; ++c) acc += w[c] * x[c];
        y[r] = acc;
    }
}

}  // namespace

FilmSirenField::FilmSirenField(FilmSirenConfig cfg) : cfg_(cfg) {
    if (cfg_.latent_dim < 1) throw ConfigError("film-siren: latent_dim must be >= 1");
    if (cfg_.layers < 1) throw ConfigError("film-siren: layers must be >= 1");
    if (cfg_.width < 1 || cfg_.width > kMaxWidth)
        throw ConfigError("film-siren: width must be in [1, 256]");
    if (!(cfg_.omega0 > 0)) throw ConfigError("film-siren: omega0 must be positive");

    int off = 0;
    auto add = [&off](std::vector<Affine>& dst, int rows, int cols) {
        dst.push_back({off, off + rows * cols, rows, cols});
        off += rows * cols + rows;
    };
    const int cond = 2 * cfg_.layers * cfg_.width;
    add(mapping_, kMappingHidden, cfg_.latent_dim);
    add(mapping_, kMappingHidden, kMappingHidden);
    add(mapping_, kMappingHidden, kMappingHidden);
    add(mapping_, cond, kMappingHidden);
    for (int l = 0; l < cfg_.layers; ++l)
        add(backbone_, cfg_.width, l == 0 ? 3 : cfg_.width);
    std::vector<Affine> tmp;
    add(tmp, 1, cfg_.width);
    alpha_head_ = tmp[0];
    tmp.clear();
    add(tmp, 3, cfg_.width + 3);
    color_head_ = tmp[0];
    params_.assign(std::size_t(off), Real(0));
}

std::size_t FilmSirenField::param_count(const FilmSirenConfig& cfg) {
    const std::size_t h = kMappingHidden, dz = std::size_t(cfg.latent_dim);
    const std::size_t l = std::size_t(cfg.layers), w = std::size_t(cfg.width);
    const std::size_t cond = 2 * l * w;
    std::size_t n = h * dz + h + 2 * (h * h + h) + cond * h + cond;  // mapping
    n += w * 3 + w + (l - 1) * (w * w + w);                          // backbone
    n += w + 1;                                                      // alpha head
    n += 3 * (w + 3) + 3;                                            // color head
    return n;
}

void FilmSirenField::initialize(std::uint64_t seed) {
    CounterRng rng = CounterRng::derive(seed, rng_stream::kInit);
    auto fill = [&](const Affine& a, Real w_bound, Real bias) {
        for (int i = 0; i < a.rows * a.cols; ++i)
            params_[std::size_t(a.w_off + i)] = (Real(2) * rng.uniform() - Real(1)) * w_bound;
        for (int r = 0; r < a.rows; ++r) params_[std::size_t(a.b_off + r)] = bias;
    };
    for (const Affine& a : mapping_) fill(a, std::sqrt(Real(6) / Real(a.cols)), Real(0));
    // Output bias: frequency half seeded at ω0 so the untrained backbone is a
    // plain sinusoidal network; phase half stays zero.
    const int lw = cfg_.layers * cfg_.width;
    for (int i = 0; i < lw; ++i) params_[std::size_t(mapping_[3].b_off + i)] = cfg_.omega0;
    for (std::size_t l = 0; l < backbone_.size(); ++l) {
        const Affine& a = backbone_[l];
        const Real bound = l == 0 ? Real(1) / Real(a.cols)
                                  : std::sqrt(Real(6) / Real(a.cols)) / cfg_.omega0;
        fill(a, bound, Real(0));
    }
    // The heads are plain affine readouts (no sinusoid follows them), so they
    // take the Xavier-style bound without the 1/omega0 damping; damped heads
    // leave the logistic outputs pinned near 0.5 at init.
    fill(alpha_head_, std::sqrt(Real(6) / Real(cfg_.width)), cfg_.alpha_bias_init);
    fill(color_head_, std::sqrt(Real(6) / Real(cfg_.width + 3)), Real(0));
}

FilmSirenField::MappingOutput FilmSirenField::run_mapping_network(
    std::span<const Real> latent) const {
    if (int(latent.size()) != cfg_.latent_dim)
        throw ConfigError("film-siren: latent dimension mismatch");
    std::vector<Real> h(latent.begin(), latent.end());
    std::vector<Real> next(kMappingHidden);
    for (int l = 0; l < 3; ++l) {
        const Affine& a = mapping_[std::size_t(l)];
        next.resize(std::size_t(a.rows));
        apply_affine(params_, a.w_off, a.b_off, a.rows, a.cols, h.data(), next.data());
        for (Real& v : next) v = v > 0 ? v : kLeakySlope * v;
        h.swap(next);
    }
    const Affine& out = mapping_[3];
    std::vector<Real> cond(std::size_t(out.rows));
    apply_affine(params_, out.w_off, out.b_off, out.rows, out.cols, h.data(), cond.data());
    const std::size_t lw = std::size_t(cfg_.layers) * std::size_t(cfg_.width);
    MappingOutput m;
    m.frequencies.assign(cond.begin(), cond.begin() + std::ptrdiff_t(lw));
    m.phases.assign(cond.begin() + std::ptrdiff_t(lw), cond.end());
    return m;
}

void FilmSirenField::forward_backbone(const Vec3& p, std::span<const Real> freq,
                                      std::span<const Real> phase, Real* features) const {
    std::array<Real, kMaxWidth> buf;
    Real in3[3] = {p.x, p.y, p.z};
    const Real* x = in3;
    for (std::size_t l = 0; l < backbone_.size(); ++l) {
        const Affine& a = backbone_[l];
        apply_affine(params_, a.w_off, a.b_off, a.rows, a.cols, x, buf.data());
        const std::size_t base = l * std::size_t(cfg_.width);
        for (int i = 0; i < a.rows; ++i)
            features[i] = std::sin(freq[base + std::size_t(i)] * buf[std::size_t(i)] +
                                   phase[base + std::size_t(i)]);
        x = features;
    }
}

Real FilmSirenField::alpha_at(const Vec3& p, std::span<const Real> freq,
                              std::span<const Real> phase) const {
    std::array<Real, kMaxWidth> feat;
    forward_backbone(p, freq, phase, feat.data());
    Real u;
    apply_affine(params_, alpha_head_.w_off, alpha_head_.b_off, 1, alpha_head_.cols, feat.data(),
                 &u);
    return logistic(u);
}

FieldOutput FilmSirenField::evaluate_at(const Vec3& p, const Vec3& d, std::span<const Real> freq,
                                        std::span<const Real> phase) const {
    std::array<Real, kMaxWidth + 3> feat;
    forward_backbone(p, freq, phase, feat.data());
    Real u;
    apply_affine(params_, alpha_head_.w_off, alpha_head_.b_off, 1, alpha_head_.cols, feat.data(),
                 &u);
    feat[std::size_t(cfg_.width) + 0] = d.x;
    feat[std::size_t(cfg_.width) + 1] = d.y;
    feat[std::size_t(cfg_.width) + 2] = d.z;
    Real c[3];
    apply_affine(params_, color_head_.w_off, color_head_.b_off, 3, color_head_.cols, feat.data(),
                 c);
    return {logistic(u), Vec3{logistic(c[0]), logistic(c[1]), logistic(c[2])}};
}

std::optional<Vec3> FilmSirenField::alpha_gradient_at(const Vec3& p, std::span<const Real> freq,
                                                      std::span<const Real> phase) const {
    // Forward-mode sweep with three tangent columns (one per coordinate).
    std::array<Real, kMaxWidth> h, pre;
    std::array<Real, std::size_t(kMaxWidth) * 3> jac, jpre;
    Real in3[3] = {p.x, p.y, p.z};
    const Real* x = in3;
    const Real* jx = nullptr;  // identity for the first layer
    for (std::size_t l = 0; l < backbone_.size(); ++l) {
        const Affine& a = backbone_[l];
        apply_affine(params_, a.w_off, a.b_off, a.rows, a.cols, x, pre.data());
        for (int r = 0; r < a.rows; ++r) {
            const Real* w = params_.data() + a.w_off + std::size_t(r) * std::size_t(a.cols);
            Real jr[3] = {0, 0, 0};
            if (jx == nullptr) {
                jr[0] = w[0];
                jr[1] = w[1];
                jr[2] = w[2];
            } else {
                for (int c = 0; c < a.cols; ++c) {
                    const Real wc = w[c];
                    jr[0] += wc * jx[c * 3 + 0];
                    jr[1] += wc * jx[c * 3 + 1];
                    jr[2] += wc * jx[c * 3 + 2];
                }
            }
            jpre[std::size_t(r) * 3 + 0] = jr[0];
            jpre[std::size_t(r) * 3 + 1] = jr[1];
            jpre[std::size_t(r) * 3 + 2] = jr[2];
        }
        const std::size_t base = l * std::size_t(cfg_.width);
        for (int r = 0; r < a.rows; ++r) {
            const Real f = freq[base + std::size_t(r)];
            const Real arg = f * pre[std::size_t(r)] + phase[base + std::size_t(r)];
            h[std::size_t(r)] = std::sin(arg);
            const Real s = std::cos(arg) * f;
            jac[std::size_t(r) * 3 + 0] = s * jpre[std::size_t(r) * 3 + 0];
            jac[std::size_t(r) * 3 + 1] = s * jpre[std::size_t(r) * 3 + 1];
            jac[std::size_t(r) * 3 + 2] = s * jpre[std::size_t(r) * 3 + 2];
        }
        x = h.data();
        jx = jac.data();
    }
    Real u = params_[std::size_t(alpha_head_.b_off)];
    Vec3 ju{};
    const Real* w = params_.data() + alpha_head_.w_off;
    for (int c = 0; c < alpha_head_.cols; ++c) {
        u += w[c] * x[c];
        ju.x += w[c] * jx[c * 3 + 0];
        ju.y += w[c] * jx[c * 3 + 1];
        ju.z += w[c] * jx[c * 3 + 2];
    }
    const Real s = logistic(u);
    const Vec3 g = ju * (s * (Real(1) - s));
    if (norm(g) < Real(1e-12)) return std::nullopt;
    return g;
}

namespace {

class FilmSirenView : public FieldView {
public:
    FilmSirenView(const FilmSirenField& f, FilmSirenField::MappingOutput m)
        : field_(f), cond_(std::move(m)) {}

    FieldOutput evaluate(const Vec3& position, const Vec3& view_direction) const override {
        return field_.evaluate_at(position, view_direction, cond_.frequencies, cond_.phases);
    }
    Real alpha(const Vec3& position) const override {
        return field_.alpha_at(position, cond_.frequencies, cond_.phases);
    }
    std::optional<Vec3> alpha_gradient(const Vec3& position) const override {
        return field_.alpha_gradient_at(position, cond_.frequencies, cond_.phases);
    }

private:
    const FilmSirenField& field_;
    FilmSirenField::MappingOutput cond_;
};

}  // namespace

std::unique_ptr<FieldView> FilmSirenField::bind(std::span<const Real> latent) const {
    return std::make_unique<FilmSirenView>(*this, run_mapping_network(latent));
}

std::optional<Real> FilmSirenField::color_lipschitz_bound(std::span<const Real> latent) const {
    const MappingOutput m = run_mapping_network(latent);
    // Per-layer operator norm ≤ max|freq| · min(Frobenius, √(norm1·normInf)).
    Real prod = Real(0.25);  // logistic slope bound on the color head
    for (std::size_t l = 0; l < backbone_.size(); ++l) {
        const Affine& a = backbone_[l];
        Real max_f = 0;
        const std::size_t base = l * std::size_t(cfg_.width);
        for (int i = 0; i < a.rows; ++i)
            max_f = std::max(max_f, std::abs(m.frequencies[base + std::size_t(i)]));
        Real frob = 0;
        std::vector<Real> col_sum(std::size_t(a.cols), Real(0));
        Real row_max = 0;
        for (int r = 0; r < a.rows; ++r) {
            Real row_sum = 0;
            for (int c = 0; c < a.cols; ++c) {
                const Real w = params_[std::size_t(a.w_off + r * a.cols + c)];
                frob += w * w;
                col_sum[std::size_t(c)] += std::abs(w);
                row_sum += std::abs(w);
            }
            row_max = std::max(row_max, row_sum);
        }
        const Real col_max = *std::max_element(col_sum.begin(), col_sum.end());
        const Real op = std::min(std::sqrt(frob), std::sqrt(col_max * row_max));
        prod *= max_f * op;
    }
    Real best = 0;
    for (int r = 0; r < 3; ++r) {
        Real sq = 0;
        for (int c = 0; c < cfg_.width; ++c) {
            const Real w = params_[std::size_t(color_head_.w_off + r * color_head_.cols + c)];
            sq += w * w;
        }
        best = std::max(best, std::sqrt(sq));
    }
    return prod * best;
}

Tape::Value FilmSirenField::condition_on_tape(Tape& tape, std::span<const Real> latent) const {
    if (int(latent.size()) != cfg_.latent_dim)
        throw ConfigError("film-siren: latent dimension mismatch");
    Tape::Value h = tape.constant(latent);
    for (int l = 0; l < 3; ++l) {
        const Affine& a = mapping_[std::size_t(l)];
        h = tape.leaky_relu(tape.affine(h, a.w_off, a.b_off, a.rows), kLeakySlope);
    }
    const Affine& out = mapping_[3];
    return tape.affine(h, out.w_off, out.b_off, out.rows);
}

FilmSirenField::TapeOutput FilmSirenField::evaluate_on_tape(Tape& tape, Tape::Value conditioning,
                                                            const Vec3& position,
                                                            const Vec3& view_direction) const {
    const int lw = cfg_.layers * cfg_.width;
    if (conditioning.size != 2 * lw)
        throw std::logic_error("film-siren: conditioning value has wrong size");
    Tape::Value x = tape.input3(position);
    Tape::Value h = x;
    for (int l = 0; l < cfg_.layers; ++l) {
        const Affine& a = backbone_[std::size_t(l)];
        Tape::Value pre = tape.affine(h, a.w_off, a.b_off, a.rows);
        Tape::Value freq = tape.slice(conditioning, l * cfg_.width, cfg_.width);
        Tape::Value phase = tape.slice(conditioning, lw + l * cfg_.width, cfg_.width);
        h = tape.film(pre, freq, phase);
    }
    Tape::Value alpha =
        tape.logistic(tape.affine(h, alpha_head_.w_off, alpha_head_.b_off, 1));
    Tape::Value cat = tape.concat(h, tape.constant3(view_direction));
    Tape::Value color =
        tape.logistic(tape.affine(cat, color_head_.w_off, color_head_.b_off, 3));
    return {alpha, color, x};
}

void FilmSirenField::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    const char magic[4] = {'O', 'F', 'N', 'F'};
    const std::uint32_t header[3] = {1u, std::uint32_t(cfg_.latent_dim),
                                     std::uint32_t(cfg_.layers)};
    out.write(magic, 4);
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(params_.data()),
              std::streamsize(params_.size() * sizeof(Real)));
    if (!out) throw ConfigError("checkpoint write failed: " + path);
}

FilmSirenField FilmSirenField::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    char magic[4];
    std::uint32_t header[3];
    in.read(magic, 4);
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in || std::memcmp(magic, "OFNF", 4) != 0)
        throw ConfigError("not an OFNF checkpoint: " + path);
    if (header[0] != 1u) throw ConfigError("unsupported OFNF version");
    in.seekg(0, std::ios::end);
    const std::streamoff total = in.tellg();
    const std::size_t blob = std::size_t(total) - 16;
    if (blob % sizeof(Real) != 0) throw ConfigError("truncated OFNF checkpoint: " + path);
    const std::size_t n = blob / sizeof(Real);

    FilmSirenConfig cfg;
    cfg.latent_dim = int(header[1]);
    cfg.layers = int(header[2]);
    // Width is not stored; recover it from the blob size (monotone in W).
    int width = -1;
    for (int w = 1; w <= kMaxWidth; ++w) {
        cfg.width = w;
        if (param_count(cfg) == n) {
            width = w;
            break;
        }
    }
    if (width < 0) throw ConfigError("OFNF blob size matches no layer width: " + path);
    cfg.width = width;
    FilmSirenField field(cfg);
    in.seekg(16, std::ios::beg);
    in.read(reinterpret_cast<char*>(field.params_.data()), std::streamsize(blob));
    if (!in) throw ConfigError("checkpoint read failed: " + path);
    return field;
}

}  // namespace occufield
