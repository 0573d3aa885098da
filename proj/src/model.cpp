#include "tie/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "tie/binio.hpp"

namespace tie {
namespace {

constexpr std::uint32_t kCkptMagic = 0x5449454b;  // "TIEK"
constexpr std::uint32_t kCkptVersion = 1;

double init_bound(int dim) { return std::sqrt(12.0 / double(dim)); }

void fill_uniform(Mat& m, Rng& rng, double bound) {
    for (double& v : m.a) v = (2.0 * next_double(rng) - 1.0) * bound;
}

void draw_row(std::span<double> row, Rng& rng, double bound) {
    for (double& v : row) v = (2.0 * next_double(rng) - 1.0) * bound;
}

void normalize_row(std::span<double> row) {
    double n2 = 0;
    for (double v : row) n2 += v * v;
    double n = std::sqrt(n2);
    if (n == 0.0) {
        // Degenerate draw; fall back to the first axis.
        row[0] = 1.0;
        return;
    }
    for (double& v : row) v /= n;
}

bool all_finite(const Mat& m) {
    for (double v : m.a)
        if (!std::isfinite(v)) return false;
    return true;
}

// --- decoders ---------------------------------------------------------

double dec_transe(std::span<const double> zs, std::span<const double> zr,
                  std::span<const double> zo) {
    double s = 0;
    for (std::size_t k = 0; k < zs.size(); ++k)
        s += std::fabs(zs[k] + zr[k] - zo[k]);
    return -s;
}

double dec_distmult(std::span<const double> zs, std::span<const double> zr,
                    std::span<const double> zo) {
    double s = 0;
    for (std::size_t k = 0; k < zs.size(); ++k) s += zs[k] * zr[k] * zo[k];
    return s;
}

// ComplEx treats the first d/2 lanes as real parts and the last d/2 as
// imaginary parts: Re(<z_s, z_r, conj(z_o)>).
double dec_complex(std::span<const double> zs, std::span<const double> zr,
                   std::span<const double> zo) {
    const std::size_t h = zs.size() / 2;
    double s = 0;
    for (std::size_t k = 0; k < h; ++k) {
        const double a = zs[k], b = zs[h + k];
        const double c = zr[k], d = zr[h + k];
        const double e = zo[k], f = zo[h + k];
        s += a * c * e + b * d * e + a * d * f - b * c * f;
    }
    return s;
}

double decode(Decoder dec, std::span<const double> zs, std::span<const double> zr,
              std::span<const double> zo) {
    switch (dec) {
        case Decoder::TransE: return dec_transe(zs, zr, zo);
        case Decoder::DistMult: return dec_distmult(zs, zr, zo);
        case Decoder::ComplEx: return dec_complex(zs, zr, zo);
    }
    return 0;
}

// d(score)/d(zs), d(zr), d(zo) scaled by g, accumulated into the outputs.
void decode_backprop(Decoder dec, std::span<const double> zs,
                     std::span<const double> zr, std::span<const double> zo,
                     double g, std::span<double> dzs, std::span<double> dzr,
                     std::span<double> dzo) {
    const std::size_t n = zs.size();
    switch (dec) {
        case Decoder::TransE:
            for (std::size_t k = 0; k < n; ++k) {
                const double u = zs[k] + zr[k] - zo[k];
                const double sg = u > 0 ? 1.0 : (u < 0 ? -1.0 : 0.0);
                dzs[k] += -g * sg;
                dzr[k] += -g * sg;
                dzo[k] += g * sg;
            }
            break;
        case Decoder::DistMult:
            for (std::size_t k = 0; k < n; ++k) {
                dzs[k] += g * zr[k] * zo[k];
                dzr[k] += g * zs[k] * zo[k];
                dzo[k] += g * zs[k] * zr[k];
            }
            break;
        case Decoder::ComplEx: {
            const std::size_t h = n / 2;
            for (std::size_t k = 0; k < h; ++k) {
                const double a = zs[k], b = zs[h + k];
                const double c = zr[k], d = zr[h + k];
                const double e = zo[k], f = zo[h + k];
                dzs[k] += g * (c * e + d * f);
                dzs[h + k] += g * (d * e - c * f);
                dzr[k] += g * (a * e - b * f);
                dzr[h + k] += g * (b * e + a * f);
                dzo[k] += g * (a * c + b * d);
                dzo[h + k] += g * (a * d - b * c);
            }
            break;
        }
    }
}

}  // namespace

int ModelConfig::temporal_width() const {
    return int(std::ceil(gamma_de * dim));
}

void ModelConfig::validate() const {
    if (dim <= 0) throw std::invalid_argument("model dim must be positive");
    if (gamma_de < 0.0 || gamma_de > 1.0)
        throw std::invalid_argument("gamma_de must lie in [0, 1]");
    if (decoder == Decoder::ComplEx && dim % 2 != 0)
        throw std::invalid_argument("ComplEx needs an even dim");
    if (n_entities == 0 || n_relations == 0 || n_steps <= 0)
        throw std::invalid_argument("empty vocabulary or step range");
}

ParameterStore ParameterStore::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ParameterStore ps;
    ps.cfg = cfg;
    ps.seed = seed;
    const int m = cfg.temporal_width();
    ps.E = Mat(cfg.n_entities, std::size_t(cfg.dim));
    ps.R = Mat(cfg.n_relations, std::size_t(cfg.dim));
    ps.W = Mat(cfg.n_entities, std::size_t(m));
    ps.B = Mat(cfg.n_entities, std::size_t(m));
    ps.H = Mat(std::size_t(cfg.n_steps), std::size_t(cfg.dim));
    const double bound = init_bound(cfg.dim);
    Rng rng(derive_seed(seed, "params"));
    fill_uniform(ps.E, rng, bound);
    fill_uniform(ps.R, rng, bound);
    fill_uniform(ps.W, rng, bound);
    fill_uniform(ps.B, rng, bound);
    fill_uniform(ps.H, rng, bound);
    for (std::size_t i = 0; i < ps.H.rows; ++i) normalize_row(ps.H.row(i));
    ps.known_e.assign(cfg.n_entities, 0);
    ps.known_r.assign(cfg.n_relations, 0);
    ps.known_t.assign(std::size_t(cfg.n_steps), 0);
    return ps;
}

bool ParameterStore::finite() const {
    return all_finite(E) && all_finite(R) && all_finite(W) && all_finite(B) &&
           all_finite(H);
}

ParameterStore init_step(const ParameterStore& prev,
                         std::span<const EntityId> new_entities,
                         std::span<const RelationId> new_relations,
                         TimeStep t, std::uint64_t step_seed) {
    ParameterStore ps = prev;
    const double bound = init_bound(ps.cfg.dim);
    Rng rng(derive_seed(step_seed, "init-step", std::uint64_t(t)));
    std::vector<EntityId> ents(new_entities.begin(), new_entities.end());
    std::sort(ents.begin(), ents.end());
    for (EntityId e : ents) {
        draw_row(ps.E.row(e), rng, bound);
        draw_row(ps.W.row(e), rng, bound);
        draw_row(ps.B.row(e), rng, bound);
        ps.known_e[e] = 1;
    }
    std::vector<RelationId> rels(new_relations.begin(), new_relations.end());
    std::sort(rels.begin(), rels.end());
    for (RelationId r : rels) {
        draw_row(ps.R.row(r), rng, bound);
        ps.known_r[r] = 1;
    }
    if (t >= 1 && std::size_t(t) <= ps.H.rows && !ps.known_t[std::size_t(t) - 1]) {
        draw_row(ps.H.row(std::size_t(t) - 1), rng, bound);
        normalize_row(ps.H.row(std::size_t(t) - 1));
        ps.known_t[std::size_t(t) - 1] = 1;
    }
    return ps;
}

void encode_entity(const ParameterStore& ps, EntityId i, TimeStep t,
                   std::span<double> out) {
    const auto z = ps.E.row(i);
    if (ps.cfg.encoder == Encoder::DE) {
        const int m = ps.cfg.temporal_width();
        const auto w = ps.W.row(i);
        const auto b = ps.B.row(i);
        for (int n = 0; n < m; ++n)
            out[std::size_t(n)] = z[std::size_t(n)] *
                                  std::sin(w[std::size_t(n)] * double(t) +
                                           b[std::size_t(n)]);
        for (int n = m; n < ps.cfg.dim; ++n) out[std::size_t(n)] = z[std::size_t(n)];
    } else {
        const auto h = ps.hyperplane(t);
        double hz = 0;
        for (std::size_t k = 0; k < z.size(); ++k) hz += h[k] * z[k];
        for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - hz * h[k];
    }
}

void encode_relation(const ParameterStore& ps, RelationId r, TimeStep t,
                     std::span<double> out) {
    const auto z = ps.R.row(r);
    if (ps.cfg.encoder == Encoder::DE) {
        std::copy(z.begin(), z.end(), out.begin());
    } else {
        const auto h = ps.hyperplane(t);
        double hz = 0;
        for (std::size_t k = 0; k < z.size(); ++k) hz += h[k] * z[k];
        for (std::size_t k = 0; k < z.size(); ++k) out[k] = z[k] - hz * h[k];
    }
}

double score(const ParameterStore& ps, const Quadruple& q) {
    const std::size_t d = std::size_t(ps.cfg.dim);
    std::vector<double> zs(d), zr(d), zo(d);
    encode_entity(ps, q.s, q.t, zs);
    encode_relation(ps, q.r, q.t, zr);
    encode_entity(ps, q.o, q.t, zo);
    return decode(ps.cfg.decoder, zs, zr, zo);
}

void score_query(const ParameterStore& ps, const QuerySpec& spec,
                 std::span<const EntityId> candidates, std::span<double> out) {
    const std::size_t d = std::size_t(ps.cfg.dim);
    std::vector<double> zf(d), zr(d), zc(d);
    encode_entity(ps, spec.fixed, spec.t, zf);
    encode_relation(ps, spec.r, spec.t, zr);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        encode_entity(ps, candidates[j], spec.t, zc);
        out[j] = spec.dir == Direction::ObjectQuery
                     ? decode(ps.cfg.decoder, zf, zr, zc)
                     : decode(ps.cfg.decoder, zc, zr, zf);
    }
}

std::vector<double>& GradAccumulator::row(ParamKind k, std::uint32_t r,
                                          std::size_t cols) {
    auto& v = rows_[row_key(k, r)];
    if (v.empty()) v.assign(cols, 0.0);
    return v;
}

const std::vector<double>* GradAccumulator::find(ParamKind k,
                                                 std::uint32_t r) const {
    auto it = rows_.find(row_key(k, r));
    return it == rows_.end() ? nullptr : &it->second;
}

void GradAccumulator::add_scaled(const GradAccumulator& other, double scale) {
    for (const auto& [key, vec] : other.rows_) {
        auto& dst = rows_[key];
        if (dst.empty()) dst.assign(vec.size(), 0.0);
        for (std::size_t i = 0; i < vec.size(); ++i) dst[i] += scale * vec[i];
    }
}

bool GradAccumulator::finite() const {
    for (const auto& [key, vec] : rows_)
        for (double v : vec)
            if (!std::isfinite(v)) return false;
    return true;
}

std::vector<std::uint64_t> GradAccumulator::sorted_keys() const {
    std::vector<std::uint64_t> keys;
    keys.reserve(rows_.size());
    for (const auto& [key, vec] : rows_) keys.push_back(key);
    std::sort(keys.begin(), keys.end());
    return keys;
}

namespace {

// Maps a gradient w.r.t. an encoded entity vector back onto E/W/B (DE) or
// E/H (HyTE) rows.
void backprop_entity_encoding(const ParameterStore& ps, EntityId i, TimeStep t,
                              std::span<const double> g, double weight,
                              GradAccumulator& grad) {
    const auto z = ps.E.row(i);
    if (ps.cfg.encoder == Encoder::DE) {
        const int m = ps.cfg.temporal_width();
        const auto w = ps.W.row(i);
        const auto b = ps.B.row(i);
        auto& dE = grad.row(ParamKind::Entity, i, z.size());
        for (int n = m; n < ps.cfg.dim; ++n)
            dE[std::size_t(n)] += weight * g[std::size_t(n)];
        if (m > 0) {
            auto& dW = grad.row(ParamKind::EntityFreq, i, std::size_t(m));
            auto& dB = grad.row(ParamKind::EntityPhase, i, std::size_t(m));
            for (int n = 0; n < m; ++n) {
                const std::size_t k = std::size_t(n);
                const double phase = w[k] * double(t) + b[k];
                const double sn = std::sin(phase), cs = std::cos(phase);
                dE[k] += weight * g[k] * sn;
                dW[k] += weight * g[k] * z[k] * cs * double(t);
                dB[k] += weight * g[k] * z[k] * cs;
            }
        }
    } else {
        const auto h = ps.hyperplane(t);
        double hz = 0, gh = 0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            hz += h[k] * z[k];
            gh += g[k] * h[k];
        }
        auto& dE = grad.row(ParamKind::Entity, i, z.size());
        auto& dH = grad.row(ParamKind::TimePlane, std::uint32_t(t - 1), z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            dE[k] += weight * (g[k] - gh * h[k]);
            dH[k] += weight * (-gh * z[k] - hz * g[k]);
        }
    }
}

void backprop_relation_encoding(const ParameterStore& ps, RelationId r,
                                TimeStep t, std::span<const double> g,
                                double weight, GradAccumulator& grad) {
    const auto z = ps.R.row(r);
    auto& dR = grad.row(ParamKind::Relation, r, z.size());
    if (ps.cfg.encoder == Encoder::DE) {
        for (std::size_t k = 0; k < z.size(); ++k) dR[k] += weight * g[k];
    } else {
        const auto h = ps.hyperplane(t);
        double hz = 0, gh = 0;
        for (std::size_t k = 0; k < z.size(); ++k) {
            hz += h[k] * z[k];
            gh += g[k] * h[k];
        }
        auto& dH = grad.row(ParamKind::TimePlane, std::uint32_t(t - 1), z.size());
        for (std::size_t k = 0; k < z.size(); ++k) {
            dR[k] += weight * (g[k] - gh * h[k]);
            dH[k] += weight * (-gh * z[k] - hz * g[k]);
        }
    }
}

}  // namespace

void backprop_query(const ParameterStore& ps, const QuerySpec& spec,
                    std::span<const EntityId> candidates,
                    std::span<const double> dscore, double weight,
                    GradAccumulator& grad) {
    const std::size_t d = std::size_t(ps.cfg.dim);
    std::vector<double> zf(d), zr(d), zc(d);
    std::vector<double> dzf(d, 0.0), dzr(d, 0.0), dzc(d);
    encode_entity(ps, spec.fixed, spec.t, zf);
    encode_relation(ps, spec.r, spec.t, zr);
    for (std::size_t j = 0; j < candidates.size(); ++j) {
        const double g = dscore[j];
        if (g == 0.0) continue;
        encode_entity(ps, candidates[j], spec.t, zc);
        std::fill(dzc.begin(), dzc.end(), 0.0);
        if (spec.dir == Direction::ObjectQuery)
            decode_backprop(ps.cfg.decoder, zf, zr, zc, g, dzf, dzr, dzc);
        else
            decode_backprop(ps.cfg.decoder, zc, zr, zf, g, dzc, dzr, dzf);
        backprop_entity_encoding(ps, candidates[j], spec.t, dzc, weight, grad);
    }
    backprop_entity_encoding(ps, spec.fixed, spec.t, dzf, weight, grad);
    backprop_relation_encoding(ps, spec.r, spec.t, dzr, weight, grad);
}

std::vector<std::uint64_t> RowSet::sorted() const {
    std::vector<std::uint64_t> out(keys.begin(), keys.end());
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::span<double> param_row(ParameterStore& ps, std::uint64_t key) {
    const std::uint32_t r = key_row(key);
    switch (key_kind(key)) {
        case ParamKind::Entity: return ps.E.row(r);
        case ParamKind::Relation: return ps.R.row(r);
        case ParamKind::EntityFreq: return ps.W.row(r);
        case ParamKind::EntityPhase: return ps.B.row(r);
        case ParamKind::TimePlane: return ps.H.row(r);
    }
    throw std::logic_error("bad param key");
}

}  // namespace

void apply_update(ParameterStore& ps, const GradAccumulator& grad,
                  const OptimizerConfig& opt, AdamState* adam, RowSet* dirty) {
    if (!grad.finite()) throw std::runtime_error("non-finite gradient");
    if (opt.adam && adam) ++adam->step;
    for (const auto& [key, g] : grad.raw()) {
        auto row = param_row(ps, key);
        if (opt.adam && adam) {
            auto& [m, v] = adam->moments[key];
            if (m.empty()) {
                m.assign(g.size(), 0.0);
                v.assign(g.size(), 0.0);
            }
            const double bc1 = 1.0 - std::pow(opt.beta1, double(adam->step));
            const double bc2 = 1.0 - std::pow(opt.beta2, double(adam->step));
            for (std::size_t k = 0; k < g.size(); ++k) {
                m[k] = opt.beta1 * m[k] + (1.0 - opt.beta1) * g[k];
                v[k] = opt.beta2 * v[k] + (1.0 - opt.beta2) * g[k] * g[k];
                row[k] -= opt.lr * (m[k] / bc1) /
                          (std::sqrt(v[k] / bc2) + opt.eps);
            }
        } else {
            for (std::size_t k = 0; k < g.size(); ++k) row[k] -= opt.lr * g[k];
        }
        if (key_kind(key) == ParamKind::TimePlane) normalize_row(row);
        if (dirty) dirty->insert(key);
    }
}

void save_checkpoint(const ParameterStore& ps, const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        binio::write_u32(os, kCkptMagic);
        binio::write_u32(os, kCkptVersion);
        binio::write_u32(os, std::uint32_t(ps.cfg.encoder));
        binio::write_u32(os, std::uint32_t(ps.cfg.decoder));
        binio::write_u32(os, std::uint32_t(ps.cfg.dim));
        binio::write_f64(os, ps.cfg.gamma_de);
        binio::write_u32(os, ps.cfg.n_entities);
        binio::write_u32(os, ps.cfg.n_relations);
        binio::write_u32(os, std::uint32_t(ps.cfg.n_steps));
        binio::write_u64(os, ps.seed);
        for (const Mat* m : {&ps.E, &ps.R, &ps.W, &ps.B, &ps.H})
            for (double v : m->a) binio::write_f64(os, v);
        for (const auto* bm : {&ps.known_e, &ps.known_r, &ps.known_t})
            os.write(reinterpret_cast<const char*>(bm->data()),
                     std::streamsize(bm->size()));
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

ParameterStore load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    if (binio::read_u32(is) != kCkptMagic)
        throw IoError(path.string() + " is not a checkpoint");
    const std::uint32_t version = binio::read_u32(is);
    if (version != kCkptVersion)
        throw IoError(path.string() + ": unsupported checkpoint version " +
                      std::to_string(version));
    ModelConfig cfg;
    cfg.encoder = Encoder(binio::read_u32(is));
    cfg.decoder = Decoder(binio::read_u32(is));
    cfg.dim = int(binio::read_u32(is));
    cfg.gamma_de = binio::read_f64(is);
    cfg.n_entities = binio::read_u32(is);
    cfg.n_relations = binio::read_u32(is);
    cfg.n_steps = TimeStep(binio::read_u32(is));
    ParameterStore ps;
    ps.cfg = cfg;
    ps.seed = binio::read_u64(is);
    const int m = cfg.temporal_width();
    ps.E = Mat(cfg.n_entities, std::size_t(cfg.dim));
    ps.R = Mat(cfg.n_relations, std::size_t(cfg.dim));
    ps.W = Mat(cfg.n_entities, std::size_t(m));
    ps.B = Mat(cfg.n_entities, std::size_t(m));
    ps.H = Mat(std::size_t(cfg.n_steps), std::size_t(cfg.dim));
    for (Mat* mat : {&ps.E, &ps.R, &ps.W, &ps.B, &ps.H})
        for (double& v : mat->a) v = binio::read_f64(is);
    ps.known_e.resize(cfg.n_entities);
    ps.known_r.resize(cfg.n_relations);
    ps.known_t.resize(std::size_t(cfg.n_steps));
    for (auto* bm : {&ps.known_e, &ps.known_r, &ps.known_t}) {
        is.read(reinterpret_cast<char*>(bm->data()), std::streamsize(bm->size()));
        if (!is) throw IoError("unexpected end of checkpoint");
    }
    return ps;
}

}  // namespace tie
