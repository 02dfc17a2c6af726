#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "advgrid/eot.hpp"
#include "advgrid/grid.hpp"
#include "advgrid/image.hpp"
#include "advgrid/oracle.hpp"
#include "advgrid/rng.hpp"
#include "advgrid/tps.hpp"

namespace advgrid {

struct GaConfig {
    int population = 50;
    int generations = 10;
    double p_crossover = 0.6;
    double p_mutation = 0.1;
    // Members whose fitness falls below this are replaced by fresh random genomes.
    double elimination_threshold = 0.2;
    // Stop as soon as the best confidence drops below early_stop_conf.
    bool early_stop = true;
    double early_stop_conf = 0.5;
    // Hard cap on detector calls, initial population included. nullopt = unlimited.
    std::optional<std::size_t> budget = 500;
    std::uint64_t seed = 0;

    void validate() const;
};

struct FitnessRecord {
    Genome genome;
    double fit = 0.0;   // always exactly 1 - y_obj
    double y_obj = 0.0;
    std::vector<double> per_transform_scores;
};

struct Population {
    std::vector<Genome> members;
    std::vector<std::optional<FitnessRecord>> fitness; // parallel to members
    int generation = 0;

    std::size_t size() const { return members.size(); }
    std::size_t unevaluated() const;
};

/// A clean image and the pedestrian box to hide.
struct Scene {
    std::string id;
    Image image;
    BBox target;
};

struct AttackConfig {
    GridSettings grid;
    GaConfig ga;
    std::optional<EotConfig> eot;     // nullopt: one query per evaluation
    std::optional<FoldConfig> folds;  // TPS folds before querying; off by default
    std::uint64_t fold_seed = 0;
    double iou_threshold = 0.45;
};

/// Renders a genome into the scene and scores it. With EOT active, every
/// transform is one query and y_obj is the mean target confidence.
class FitnessEvaluator {
public:
    FitnessEvaluator(const Scene& scene, Oracle& oracle, QueryLedger& ledger,
                     const AttackConfig& cfg);

    FitnessRecord operator()(const Genome& genome, std::span<const TransformSample> transforms,
                             std::uint64_t fold_stream = 0) const;

    /// Detector calls one evaluation costs with the given transform set.
    static std::size_t cost(std::span<const TransformSample> transforms) {
        return transforms.empty() ? 1 : transforms.size();
    }

    Image render(const Genome& genome) const;

private:
    const Scene& scene_;
    Oracle& oracle_;
    QueryLedger& ledger_;
    const AttackConfig& cfg_;
    Mask mask_;
};

FitnessRecord evaluate_fitness(const Genome& genome, const Scene& scene, Oracle& oracle,
                               const AttackConfig& cfg,
                               std::span<const TransformSample> transforms, QueryLedger& ledger);

Population init_population(const GaConfig& cfg, std::size_t genome_length, Rng& rng);

/// Replaces every member with fit below the elimination threshold by a fresh,
/// unevaluated random genome. Survivors keep their genome and fitness.
/// Returns the number of replaced members through `replaced` when given.
Population select(const Population& pop, const GaConfig& cfg, Rng& rng,
                  std::size_t* replaced = nullptr);

/// Exchanges the genes at positions >= cut between a and b.
void crossover_pair(Genome& a, Genome& b, std::size_t cut);

/// Random perfect matching, then a tail swap at a uniform cut with
/// probability p_crossover per pair. Changed members lose their fitness.
Population crossover(const Population& pop, double p_crossover, Rng& rng);

/// Per member: one uniform position, flipped with probability p_mutation.
Population mutate(const Population& pop, double p_mutation, Rng& rng);

enum class AttackStatus {
    Succeeded,        // best confidence fell below early_stop_conf
    Completed,        // all generations ran without success
    BudgetExhausted,  // ran out of queries without success
    Aborted,          // oracle transport / protocol failure, partial result
};

std::string to_string(AttackStatus status);

struct AttackResult {
    Genome best_genome;
    double best_fit = 0.0;
    bool success = false;
    std::size_t queries_used = 0;
    int generations_run = 0;
    std::vector<double> history; // best fit after each evaluation round
    AttackStatus status = AttackStatus::Completed;
    std::string error;

    double best_confidence() const { return 1.0 - best_fit; }
};

struct GenerationEvent {
    int generation = 0;
    std::size_t evaluations = 0;  // members scored in this round
    std::size_t replaced = 0;     // select() replacements feeding the next round
    std::size_t invalidated = 0;  // members needing evaluation in the next round
    std::size_t queries_used = 0;
    double best_fit = 0.0;
};

struct AttackObserver {
    std::function<void(const FitnessRecord&)> on_fitness;
    std::function<void(const GenerationEvent&)> on_generation;
};

/// The genetic search: evaluate pending members, track the best-so-far, then
/// select -> crossover -> mutate, for up to ga.generations rounds after the
/// initial one.
AttackResult run_attack(const Scene& scene, Oracle& oracle, const AttackConfig& cfg,
                        const AttackObserver& observer = {});

/// Baseline: i.i.d. random genomes until success or the budget is spent.
/// Genomes are drawn in the same order as init_population with the same seed.
AttackResult random_search(const Scene& scene, Oracle& oracle, const AttackConfig& cfg,
                           std::size_t budget, const AttackObserver& observer = {});

} // namespace advgrid
