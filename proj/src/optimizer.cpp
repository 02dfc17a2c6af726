#include "advgrid/optimizer.hpp"

#include <algorithm>
#include <numeric>

#include "advgrid/compositor.hpp"
#include "advgrid/errors.hpp"

namespace advgrid {

void GaConfig::validate() const {
    if (population < 2 || population % 2 != 0) {
        throw ConfigError("ga.g must be an even number >= 2");
    }
    if (generations < 1) {
        throw ConfigError("ga.s_gen must be >= 1");
    }
    if (!(p_crossover >= 0.0 && p_crossover <= 1.0)) {
        throw ConfigError("ga.p_c must lie in [0, 1]");
    }
    if (!(p_mutation >= 0.0 && p_mutation <= 1.0)) {
        throw ConfigError("ga.p_m must lie in [0, 1]");
    }
    if (!(elimination_threshold >= 0.0 && elimination_threshold <= 1.0)) {
        throw ConfigError("ga.elimination_threshold must lie in [0, 1]");
    }
    if (!(early_stop_conf > 0.0 && early_stop_conf <= 1.0)) {
        throw ConfigError("ga.early_stop_conf must lie in (0, 1]");
    }
    if (budget && *budget == 0) {
        throw ConfigError("ga.budget must be >= 1");
    }
}

std::size_t Population::unevaluated() const {
    return static_cast<std::size_t>(
        std::count_if(fitness.begin(), fitness.end(), [](const auto& f) { return !f.has_value(); }));
}

// ---------------------------------------------------------------------------

FitnessEvaluator::FitnessEvaluator(const Scene& scene, Oracle& oracle, QueryLedger& ledger,
                                   const AttackConfig& cfg)
    : scene_(scene), oracle_(oracle), ledger_(ledger), cfg_(cfg),
      mask_(mask_from_bbox(scene.target, scene.image.width(), scene.image.height())) {}

Image FitnessEvaluator::render(const Genome& genome) const {
    return compose(scene_.image, decode_genome(genome, cfg_.grid), scene_.target, mask_);
}

FitnessRecord FitnessEvaluator::operator()(const Genome& genome,
                                           std::span<const TransformSample> transforms,
                                           std::uint64_t fold_stream) const {
    if (ledger_.remaining() < cost(transforms)) {
        throw BudgetExhausted("not enough budget left for one fitness evaluation");
    }
    Image adv = render(genome);
    if (cfg_.folds) {
        Rng fold_rng(mix_seed(cfg_.fold_seed, fold_stream));
        adv = simulate_folds(adv, *cfg_.folds, fold_rng);
    }

    FitnessRecord rec;
    rec.genome = genome;
    if (transforms.empty()) {
        const auto dets = detect(oracle_, adv, ledger_);
        rec.y_obj = target_confidence(dets, scene_.target, cfg_.iou_threshold);
    } else {
        rec.per_transform_scores.reserve(transforms.size());
        for (const auto& t : transforms) {
            const auto view = apply_transform(adv, t);
            const auto box = transform_box(scene_.target, adv.width(), adv.height(), t);
            const auto dets = detect(oracle_, view, ledger_);
            rec.per_transform_scores.push_back(target_confidence(dets, box, cfg_.iou_threshold));
        }
        rec.y_obj = std::accumulate(rec.per_transform_scores.begin(), rec.per_transform_scores.end(), 0.0) /
                    static_cast<double>(rec.per_transform_scores.size());
    }
    rec.fit = 1.0 - rec.y_obj;
    return rec;
}

FitnessRecord evaluate_fitness(const Genome& genome, const Scene& scene, Oracle& oracle,
                               const AttackConfig& cfg,
                               std::span<const TransformSample> transforms, QueryLedger& ledger) {
    return FitnessEvaluator(scene, oracle, ledger, cfg)(genome, transforms);
}

// ---------------------------------------------------------------------------

Population init_population(const GaConfig& cfg, std::size_t genome_length, Rng& rng) {
    cfg.validate();
    Population pop;
    pop.members.reserve(static_cast<std::size_t>(cfg.population));
    for (int g = 0; g < cfg.population; ++g) {
        pop.members.push_back(random_genome(genome_length, rng));
    }
    pop.fitness.assign(pop.members.size(), std::nullopt);
    return pop;
}

Population select(const Population& pop, const GaConfig& cfg, Rng& rng, std::size_t* replaced) {
    Population next = pop;
    std::size_t count = 0;
    for (std::size_t i = 0; i < next.size(); ++i) {
        if (!next.fitness[i]) {
            throw ConfigError("select() needs every member evaluated");
        }
        if (next.fitness[i]->fit < cfg.elimination_threshold) {
            next.members[i] = random_genome(next.members[i].size(), rng);
            next.fitness[i].reset();
            ++count;
        }
    }
    if (replaced != nullptr) {
        *replaced = count;
    }
    return next;
}

void crossover_pair(Genome& a, Genome& b, std::size_t cut) {
    if (a.size() != b.size()) {
        throw ConfigError("crossover of genomes with different lengths");
    }
    for (std::size_t i = cut; i < a.size(); ++i) {
        std::swap(a.bits[i], b.bits[i]);
    }
}

Population crossover(const Population& pop, double p_crossover, Rng& rng) {
    if (pop.size() % 2 != 0) {
        throw ConfigError("crossover needs an even population");
    }
    Population next = pop;
    std::vector<std::size_t> order(next.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
        std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    for (std::size_t p = 0; p + 1 < order.size(); p += 2) {
        const auto i = order[p];
        const auto j = order[p + 1];
        const auto cut = uniform_index(rng, next.members[i].size());
        if (!bernoulli(rng, p_crossover)) {
            continue;
        }
        crossover_pair(next.members[i], next.members[j], cut);
        if (next.members[i] != pop.members[i]) {
            next.fitness[i].reset();
        }
        if (next.members[j] != pop.members[j]) {
            next.fitness[j].reset();
        }
    }
    return next;
}

Population mutate(const Population& pop, double p_mutation, Rng& rng) {
    Population next = pop;
    for (std::size_t i = 0; i < next.size(); ++i) {
        auto& bits = next.members[i].bits;
        const auto pos = uniform_index(rng, bits.size());
        if (bernoulli(rng, p_mutation)) {
            bits[pos] ^= 1U;
            next.fitness[i].reset();
        }
    }
    return next;
}

// ---------------------------------------------------------------------------

std::string to_string(AttackStatus status) {
    switch (status) {
    case AttackStatus::Succeeded:
        return "succeeded";
    case AttackStatus::Completed:
        return "completed";
    case AttackStatus::BudgetExhausted:
        return "budget-exhausted";
    case AttackStatus::Aborted:
        return "aborted";
    }
    return "unknown";
}

namespace {

void check_attack_inputs(const Scene& scene, const AttackConfig& cfg) {
    cfg.ga.validate();
    cfg.grid.layout().validate();
    if (!scene.target.inside(scene.image.width(), scene.image.height())) {
        throw ConfigError("target box of scene '" + scene.id + "' lies outside the image");
    }
    if (cfg.eot) {
        cfg.eot->validate();
    }
    // Fail early on geometry that no genome can realise.
    GridSpec probe;
    probe.dimension = cfg.grid.dimension;
    probe.width_ratio = cfg.grid.width_ratio;
    probe.color = cfg.grid.color;
    probe.cells.assign(cfg.grid.layout().length() - cfg.grid.layout().cell_offset(), 0);
    grid_geometry(probe, scene.target);
}

std::vector<TransformSample> transforms_for(const AttackConfig& cfg, std::uint64_t stream) {
    if (!cfg.eot) {
        return {};
    }
    Rng rng(mix_seed(cfg.eot->seed, stream));
    return sample_transforms(*cfg.eot, rng);
}

/// Best-so-far bookkeeping shared by the GA and the random baseline.
struct Incumbent {
    bool have = false;
    Genome genome;
    double fit = 0.0;

    void offer(const FitnessRecord& rec) {
        if (!have || rec.fit > fit) {
            genome = rec.genome;
            fit = rec.fit;
            have = true;
        }
    }
    bool below(double conf) const { return have && 1.0 - fit < conf; }
};

void finish(AttackResult& result, const Incumbent& best, const QueryLedger& ledger,
            const GaConfig& ga) {
    result.best_genome = best.genome;
    result.best_fit = best.fit;
    result.success = best.below(ga.early_stop_conf);
    result.queries_used = ledger.used();
    if (result.success && result.status != AttackStatus::Aborted) {
        result.status = AttackStatus::Succeeded;
    }
}

} // namespace

AttackResult run_attack(const Scene& scene, Oracle& oracle, const AttackConfig& cfg,
                        const AttackObserver& observer) {
    check_attack_inputs(scene, cfg);
    const auto& ga = cfg.ga;
    QueryLedger ledger(ga.budget);
    FitnessEvaluator evaluate(scene, oracle, ledger, cfg);
    Rng rng(ga.seed);

    Population pop = init_population(ga, cfg.grid.layout().length(), rng);
    Incumbent best;
    AttackResult result;
    std::uint64_t evaluation_index = 0;
    bool stop = false;

    for (int s = 0; !stop; ++s) {
        pop.generation = s;
        const auto transforms = transforms_for(cfg, static_cast<std::uint64_t>(s));
        const auto cost = FitnessEvaluator::cost(transforms);
        std::size_t evaluated = 0;

        for (std::size_t g = 0; g < pop.size() && !stop; ++g) {
            if (pop.fitness[g]) {
                continue;
            }
            if (ledger.remaining() < cost) {
                result.status = AttackStatus::BudgetExhausted;
                stop = true;
                break;
            }
            try {
                auto rec = evaluate(pop.members[g], transforms, evaluation_index++);
                if (observer.on_fitness) {
                    observer.on_fitness(rec);
                }
                best.offer(rec);
                pop.fitness[g] = std::move(rec);
                ++evaluated;
            } catch (const TransportError& e) {
                result.status = AttackStatus::Aborted;
                result.error = e.what();
                stop = true;
                break;
            } catch (const ProtocolError& e) {
                result.status = AttackStatus::Aborted;
                result.error = e.what();
                stop = true;
                break;
            }
            if (ga.early_stop && best.below(ga.early_stop_conf)) {
                stop = true;
            }
        }
        if (best.have) {
            result.history.push_back(best.fit);
        }

        GenerationEvent event;
        event.generation = s;
        event.evaluations = evaluated;
        if (!stop && s < ga.generations) {
            pop = select(pop, ga, rng, &event.replaced);
            pop = crossover(pop, ga.p_crossover, rng);
            pop = mutate(pop, ga.p_mutation, rng);
            result.generations_run = s + 1;
            event.invalidated = pop.unevaluated();
        } else if (!stop) {
            result.status = AttackStatus::Completed;
            stop = true;
        }
        event.queries_used = ledger.used();
        event.best_fit = best.fit;
        if (observer.on_generation) {
            observer.on_generation(event);
        }
    }

    finish(result, best, ledger, ga);
    return result;
}

AttackResult random_search(const Scene& scene, Oracle& oracle, const AttackConfig& cfg,
                           std::size_t budget, const AttackObserver& observer) {
    check_attack_inputs(scene, cfg);
    if (budget == 0) {
        throw ConfigError("random search budget must be >= 1");
    }
    QueryLedger ledger(budget);
    FitnessEvaluator evaluate(scene, oracle, ledger, cfg);
    Rng rng(cfg.ga.seed);
    const auto length = cfg.grid.layout().length();
    Incumbent best;
    AttackResult result;
    result.status = AttackStatus::BudgetExhausted;

    for (std::uint64_t i = 0;; ++i) {
        const auto transforms = transforms_for(cfg, i);
        if (ledger.remaining() < FitnessEvaluator::cost(transforms)) {
            break;
        }
        try {
            const auto rec = evaluate(random_genome(length, rng), transforms, i);
            if (observer.on_fitness) {
                observer.on_fitness(rec);
            }
            best.offer(rec);
        } catch (const TransportError& e) {
            result.status = AttackStatus::Aborted;
            result.error = e.what();
            break;
        } catch (const ProtocolError& e) {
            result.status = AttackStatus::Aborted;
            result.error = e.what();
            break;
        }
        result.history.push_back(best.fit);
        if (cfg.ga.early_stop && best.below(cfg.ga.early_stop_conf)) {
            break;
        }
    }
    finish(result, best, ledger, cfg.ga);
    return result;
}

} // namespace advgrid
