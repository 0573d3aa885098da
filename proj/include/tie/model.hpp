// Shallow time-aware embedding models: flat parameter matrices with
// versioned step snapshots, diachronic (DE) and hyperplane-projection
// (HyTE) encoders, TransE/DistMult/ComplEx decoders, batched scoring,
// analytic back-propagation into sparse per-row gradients, and the SGD /
// Adam update rules.
//
// Scoring is read-only and safe to call from parallel workers; gradient
// accumulation and parameter updates must be serialized by the caller.
#pragma once

#include <filesystem>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tie/core.hpp"

namespace tie {

enum class Encoder : std::uint8_t { DE = 0, HyTE = 1 };
enum class Decoder : std::uint8_t { TransE = 0, DistMult = 1, ComplEx = 2 };
enum class Direction : std::uint8_t { ObjectQuery = 0, SubjectQuery = 1 };

struct ModelConfig {
    Encoder encoder = Encoder::DE;
    Decoder decoder = Decoder::ComplEx;
    int dim = 128;
    double gamma_de = 0.5;  // DE temporal/static split; distinct from the replay discount
    std::uint32_t n_entities = 0;
    std::uint32_t n_relations = 0;
    TimeStep n_steps = 0;

    /// Number of leading DE lanes modulated by sin(w t + b).
    int temporal_width() const;
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// theta^t: entity/relation embeddings E and R, DE frequency/phase rows W
/// and B, HyTE unit hyperplane normals H (one row per time step), plus
/// bitmaps of rows known as of the last trained step.
struct ParameterStore {
    ModelConfig cfg;
    std::uint64_t seed = 0;
    Mat E, R, W, B, H;
    std::vector<std::uint8_t> known_e, known_r, known_t;

    /// Fresh store with every row drawn uniform(-sqrt(12/d), sqrt(12/d));
    /// HyTE hyperplanes renormalized to unit length. Nothing marked known.
    static ParameterStore create(const ModelConfig& cfg, std::uint64_t seed);

    std::span<const double> hyperplane(TimeStep t) const {
        return H.row(std::size_t(t) - 1);
    }
    bool finite() const;  // no NaN/Inf anywhere
};

/// theta^t from theta^{t-1}: known rows copied verbatim, rows of the listed
/// first-appearing entities/relations redrawn uniform(+-sqrt(12/d)), the
/// step-t hyperplane redrawn and normalized. Newly drawn rows and step t
/// are marked known in the result.
ParameterStore init_step(const ParameterStore& prev,
                         std::span<const EntityId> new_entities,
                         std::span<const RelationId> new_relations,
                         TimeStep t, std::uint64_t step_seed);

void encode_entity(const ParameterStore& ps, EntityId i, TimeStep t,
                   std::span<double> out);
void encode_relation(const ParameterStore& ps, RelationId r, TimeStep t,
                     std::span<double> out);

double score(const ParameterStore& ps, const Quadruple& q);

/// One ranking/negative-sampling query: the fixed entity is the subject for
/// object queries and the object for subject queries.
struct QuerySpec {
    EntityId fixed = 0;
    RelationId r = 0;
    TimeStep t = 0;
    Direction dir = Direction::ObjectQuery;
};

inline QuerySpec object_query(const Quadruple& q) {
    return {q.s, q.r, q.t, Direction::ObjectQuery};
}
inline QuerySpec subject_query(const Quadruple& q) {
    return {q.o, q.r, q.t, Direction::SubjectQuery};
}

/// Scores every candidate entity substituted into the open slot. Values are
/// identical to per-item score() calls.
void score_query(const ParameterStore& ps, const QuerySpec& spec,
                 std::span<const EntityId> candidates, std::span<double> out);

enum class ParamKind : std::uint8_t {
    Entity = 0,      // rows of E
    Relation = 1,    // rows of R
    EntityFreq = 2,  // rows of W
    EntityPhase = 3, // rows of B
    TimePlane = 4,   // rows of H
};

inline std::uint64_t row_key(ParamKind k, std::uint32_t row) {
    return (std::uint64_t(std::uint8_t(k)) << 56) | row;
}
inline ParamKind key_kind(std::uint64_t key) {
    return ParamKind(std::uint8_t(key >> 56));
}
inline std::uint32_t key_row(std::uint64_t key) {
    return std::uint32_t(key & 0xffffffffu);
}

/// Sparse per-row gradient map. Merging is associative; iteration for
/// anything order-sensitive should go through sorted_keys().
class GradAccumulator {
  public:
    std::vector<double>& row(ParamKind k, std::uint32_t r, std::size_t cols);
    const std::vector<double>* find(ParamKind k, std::uint32_t r) const;
    void add_scaled(const GradAccumulator& other, double scale = 1.0);
    void clear() { rows_.clear(); }
    bool empty() const { return rows_.empty(); }
    std::size_t size() const { return rows_.size(); }
    bool finite() const;
    std::vector<std::uint64_t> sorted_keys() const;

    std::unordered_map<std::uint64_t, std::vector<double>>& raw() { return rows_; }
    const std::unordered_map<std::uint64_t, std::vector<double>>& raw() const {
        return rows_;
    }

  private:
    std::unordered_map<std::uint64_t, std::vector<double>> rows_;
};

/// Accumulates weight * d(score_j)/d(theta) for every candidate j of a query,
/// where dscore[j] is the upstream gradient on candidate j's score. Touches
/// only rows of entities/relations/time-planes appearing in the query.
void backprop_query(const ParameterStore& ps, const QuerySpec& spec,
                    std::span<const EntityId> candidates,
                    std::span<const double> dscore, double weight,
                    GradAccumulator& grad);

/// Rows touched by updates since the last step snapshot; ordering helper
/// for deterministic floating-point sums.
struct RowSet {
    std::unordered_set<std::uint64_t> keys;
    void insert(std::uint64_t k) { keys.insert(k); }
    std::vector<std::uint64_t> sorted() const;
};

struct OptimizerConfig {
    bool adam = false;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Lazily allocated per-row Adam moments (rows never touched carry none).
struct AdamState {
    std::unordered_map<std::uint64_t, std::pair<std::vector<double>,
                                                std::vector<double>>> moments;
    std::int64_t step = 0;
};

/// Applies one update from the accumulated gradients. Touched rows are
/// recorded in `dirty` when given. HyTE hyperplane rows touched by the
/// update are renormalized to unit length afterwards. Throws on non-finite
/// gradients.
void apply_update(ParameterStore& ps, const GradAccumulator& grad,
                  const OptimizerConfig& opt, AdamState* adam, RowSet* dirty);

/// Versioned binary checkpoint; bit-exact round-trip.
void save_checkpoint(const ParameterStore& ps, const std::filesystem::path& path);
ParameterStore load_checkpoint(const std::filesystem::path& path);

}  // namespace tie
