// Domain types for temporal knowledge graphs: identifiers, facts, per-step
// snapshots with train/valid/test splits, cumulative known-entity tracking,
// wildcard triple patterns and the added/deleted set algebra.
#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "tie/common.hpp"

namespace tie {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TimeStep = std::int32_t;  // discrete snapshot index, counted from 1

struct Triple {
    EntityId s = 0;
    RelationId r = 0;
    EntityId o = 0;
    friend bool operator==(const Triple&, const Triple&) = default;
};

struct TripleHash {
    std::size_t operator()(const Triple& t) const {
        std::uint64_t h = splitmix64(t.s);
        h = splitmix64(h ^ t.r);
        return std::size_t(splitmix64(h ^ t.o));
    }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

struct Quadruple {
    EntityId s = 0;
    RelationId r = 0;
    EntityId o = 0;
    TimeStep t = 0;
    Triple triple() const { return {s, r, o}; }
    friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

enum class Split : std::uint8_t { Train = 0, Valid = 1, Test = 2 };

/// The seven wildcard shapes of a triple pattern. Concrete slots keep their
/// ids, wildcard slots are ignored. The weight table assigns lambda = 0 to
/// AnyRAny, which keeps the shape in the enumeration without contributing
/// to frequency scores.
enum class PatternShape : std::uint8_t {
    SRO = 0,     // (s, r, o)
    SAnyO = 1,   // (s, *, o)
    SRAny = 2,   // (s, r, *)
    AnyRO = 3,   // (*, r, o)
    SAnyAny = 4, // (s, *, *)
    AnyAnyO = 5, // (*, *, o)
    AnyRAny = 6, // (*, r, *)
};
inline constexpr int kNumPatterns = 7;

inline constexpr std::array<double, kNumPatterns> kDefaultPatternWeights = {
    2.0, 1.5, 1.3, 1.3, 1.0, 1.0, 0.0};

const char* pattern_name(PatternShape p);

/// One KG snapshot: the full fact set D^t partitioned into splits, plus the
/// entity/relation sets present in at least one fact. Immutable once built;
/// lookup indexes are precomputed by finalize().
struct Snapshot {
    TimeStep t = 0;
    std::vector<Quadruple> facts;       // all of D^t, any order
    std::vector<Split> split;           // split[i] labels facts[i]

    // Derived by finalize():
    TripleSet fact_set;                                    // membership over D^t
    std::unordered_map<std::uint64_t, std::vector<EntityId>> objects_by_sr;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> subjects_by_or;
    std::vector<EntityId> entities;     // E^t, ascending
    std::vector<RelationId> relations;  // R^t, ascending

    void finalize();
    bool contains(const Triple& tr) const { return fact_set.count(tr) != 0; }
    std::size_t count_objects(EntityId s, RelationId r) const;
    std::size_t count_subjects(EntityId o, RelationId r) const;
    std::vector<Quadruple> facts_in(Split which) const;
};

/// The temporal KG: snapshots 1..T with vocabularies and cumulative
/// known-entity/relation bookkeeping. first_seen_* give the step at which
/// an id first appears in any fact (0 = never).
struct SnapshotSequence {
    std::vector<std::string> entity_names;    // id -> name
    std::vector<std::string> relation_names;
    std::vector<Snapshot> snapshots;          // index 0 holds step 1
    std::vector<TimeStep> first_seen_entity;
    std::vector<TimeStep> first_seen_relation;
    std::uint64_t split_seed = 0;  // seed used when splits were sampled, 0 if given

    TimeStep num_steps() const { return TimeStep(snapshots.size()); }
    std::size_t num_entities() const { return entity_names.size(); }
    std::size_t num_relations() const { return relation_names.size(); }

    const Snapshot& at(TimeStep t) const;  // throws on out-of-range t

    /// Entities first seen at or before t, ascending by id.
    std::vector<EntityId> known_entities(TimeStep t) const;
    std::size_t known_entity_count(TimeStep t) const;
    bool entity_known(EntityId e, TimeStep t) const {
        return first_seen_entity[e] != 0 && first_seen_entity[e] <= t;
    }
    bool relation_known(RelationId r, TimeStep t) const {
        return first_seen_relation[r] != 0 && first_seen_relation[r] <= t;
    }

    /// Recomputes derived members (first_seen_*, per-snapshot indexes).
    /// Call after filling snapshots.
    void finalize();
};

/// Facts of D^t whose (s,r,o) triple is absent from D^{t-1}. For t = 1 the
/// whole snapshot is returned. `source` restricts which split of D^t is
/// scanned; membership at t-1 is always checked against the full D^{t-1}.
std::vector<Quadruple> added_facts(const SnapshotSequence& seq, TimeStep t);
std::vector<Quadruple> added_facts(const SnapshotSequence& seq, TimeStep t,
                                   Split source);

/// N^t: triples present somewhere in the buffer and absent from the current
/// snapshot's full fact set, stamped with the current step.
std::vector<Quadruple> deleted_facts(const TripleSet& buffer_triples,
                                     const Snapshot& current, TimeStep t);

}  // namespace tie
