#include "colarec/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "colarec/error.hpp"
#include "colarec/metrics.hpp"

namespace colarec {

GidNeighborhood::GidNeighborhood(const GidAssignment& gids) : gids_(&gids), buckets_(gids.k()) {
    for (std::size_t i = 0; i < gids.n_items(); ++i) buckets_[gids.gid(i)[0]].push_back(i);
}

std::vector<std::size_t> GidNeighborhood::positives(std::size_t item) const {
    std::vector<std::size_t> out;
    for (auto j : buckets_[gids_->gid(item)[0]]) {
        if (j != item) out.push_back(j);
    }
    return out;
}

bool GidNeighborhood::no_overlap(std::size_t a, std::size_t b) const {
    const auto x = gids_->gid(a);
    const auto y = gids_->gid(b);
    for (std::size_t t = 0; t < x.size(); ++t) {
        if (x[t] == y[t]) return false;
    }
    return true;
}

std::vector<std::size_t> GidNeighborhood::negatives(std::size_t item) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < gids_->n_items(); ++j) {
        if (no_overlap(item, j)) out.push_back(j);
    }
    return out;
}

std::optional<std::size_t> GidNeighborhood::sample_positive(std::size_t item, Rng& rng) const {
    const auto& bucket = buckets_[gids_->gid(item)[0]];
    if (bucket.size() < 2) return std::nullopt;
    // bucket minus item, indexed without building it
    std::size_t k = rng.uniform_index(bucket.size() - 1);
    const auto self = static_cast<std::size_t>(std::lower_bound(bucket.begin(), bucket.end(), item) - bucket.begin());
    if (k >= self) ++k;
    return bucket[k];
}

std::optional<std::size_t> GidNeighborhood::sample_negative(std::size_t item, Rng& rng) const {
    const std::size_t n = gids_->n_items();
    for (int attempt = 0; attempt < 64; ++attempt) {
        const std::size_t j = rng.uniform_index(n);
        if (no_overlap(item, j)) return j;
    }
    const auto pool = negatives(item);
    if (pool.empty()) return std::nullopt;
    return pool[rng.uniform_index(pool.size())];
}

std::optional<ContrastivePair> sample_contrastive_pair(std::size_t item, const GidNeighborhood& neighborhood,
                                                       Rng& rng, std::optional<std::size_t> shared_negative) {
    const auto positive = neighborhood.sample_positive(item, rng);
    if (!positive) return std::nullopt;
    if (shared_negative && neighborhood.no_overlap(item, *shared_negative)) {
        return ContrastivePair{*positive, *shared_negative};
    }
    const auto negative = neighborhood.sample_negative(item, rng);
    if (!negative) return std::nullopt;
    return ContrastivePair{*positive, *negative};
}

std::size_t sample_negative_item(const InteractionDataset& dataset, std::size_t user, Rng& rng) {
    const auto& pos = dataset.user_items(user, Split::train);
    const std::size_t n = dataset.n_items();
    if (pos.size() >= n) {
        throw Error(ErrorKind::invalid_argument, "user " + std::to_string(user) + " has no non-interacted item");
    }
    for (;;) {
        const std::size_t j = rng.uniform_index(n);
        if (!std::binary_search(pos.begin(), pos.end(), static_cast<std::uint32_t>(j))) return j;
    }
}

ExampleSampler::ExampleSampler(const InteractionDataset& dataset, const Vocabulary& vocab,
                               const GidAssignment& gids, InputConfig input, LossToggles toggles)
    : dataset_(dataset), vocab_(vocab), gids_(gids), neighborhood_(gids), input_(input), toggles_(toggles) {
    if (gids.n_items() != dataset.n_items()) {
        throw Error(ErrorKind::shape, "GID assignment covers " + std::to_string(gids.n_items()) +
                                          " items, dataset has " + std::to_string(dataset.n_items()));
    }
}

TrainingExample ExampleSampler::make(std::size_t user, std::size_t item, Rng& rng) const {
    TrainingExample ex;
    ex.user = user;
    ex.item = item;
    const auto gid = gids_.gid(item);
    ex.gid.assign(gid.begin(), gid.end());
    const bool need_user = toggles_.rec || toggles_.bpr;
    const bool need_item = toggles_.index || toggles_.bpr || toggles_.contrastive;
    if (need_user) ex.user_input = build_user_input(user, dataset_, vocab_, input_, rng, item);
    if (need_item) ex.item_input = build_item_input(item, dataset_, vocab_, input_, rng);
    std::optional<std::size_t> negative;
    if (toggles_.bpr) {
        ex.negative = sample_negative_item(dataset_, user, rng);
        ex.negative_input = build_item_input(ex.negative, dataset_, vocab_, input_, rng);
        negative = ex.negative;
    }
    if (toggles_.contrastive) {
        if (const auto pair = sample_contrastive_pair(item, neighborhood_, rng, negative)) {
            ex.has_contrastive = true;
            ex.positive = pair->positive;
            ex.contrastive_negative = pair->negative;
            ex.positive_input = build_item_input(pair->positive, dataset_, vocab_, input_, rng);
            ex.contrastive_negative_input =
                pair->negative == ex.negative && toggles_.bpr
                    ? ex.negative_input
                    : build_item_input(pair->negative, dataset_, vocab_, input_, rng);
        }
    }
    return ex;
}

namespace {

template <class T>
Var batch_mean(Graph<T>& g, std::vector<Var>& terms, std::size_t batch) {
    const Var total = terms.size() == 1 ? terms[0] : g.sum(g.concat_cols(terms));
    return g.scale(total, T(1) / static_cast<T>(batch));
}

template <class T>
double scalar_of(const Graph<T>& g, Var v) {
    return static_cast<double>(g.value(v)[0]);
}

}  // namespace

template <class T>
JointLoss<T> joint_loss(Seq2SeqModel<T>& model, Graph<T>& g, std::span<const TrainingExample> batch,
                        const LossSettings& settings) {
    const auto& on = settings.toggles;
    if (!on.rec && !on.index && !on.bpr && !on.contrastive) {
        throw Error(ErrorKind::config, "every loss term is disabled");
    }
    if (batch.empty()) throw Error(ErrorKind::invalid_argument, "empty batch");
    if (settings.alpha < 0.0) throw Error(ErrorKind::config, "alpha must be >= 0");

    std::vector<Var> rec, index, bpr, con;
    std::size_t skipped = 0;
    for (const auto& ex : batch) {
        std::optional<typename Seq2SeqModel<T>::Encoded> xu, xi;
        if (on.rec || on.bpr) xu = model.encode(g, ex.user_input);
        if (on.index || on.bpr || on.contrastive) xi = model.encode(g, ex.item_input);
        if (on.rec) rec.push_back(model.sequence_nll(g, *xu, ex.gid));
        if (on.index) index.push_back(model.sequence_nll(g, *xi, ex.gid));
        if (on.bpr) {
            const auto xn = model.encode(g, ex.negative_input);
            const Var diff = g.dot(xu->pooled, g.sub(xi->pooled, xn.pooled));
            bpr.push_back(g.scale(g.log_sigmoid(diff), T(-1)));
        }
        if (on.contrastive) {
            if (!ex.has_contrastive) {
                ++skipped;
                continue;
            }
            const auto xp = model.encode(g, ex.positive_input);
            const auto xn = model.encode(g, ex.contrastive_negative_input);
            const Var diff = g.dot(xi->pooled, g.sub(xp.pooled, xn.pooled));
            con.push_back(g.scale(g.log_sigmoid(diff), T(-1)));
        }
    }

    JointLoss<T> out;
    std::vector<Var> parts;
    const std::size_t n = batch.size();
    if (!rec.empty()) {
        parts.push_back(batch_mean(g, rec, n));
        out.parts.rec = scalar_of(g, parts.back());
    }
    if (!index.empty()) {
        parts.push_back(batch_mean(g, index, n));
        out.parts.index = scalar_of(g, parts.back());
    }
    if (!bpr.empty()) {
        parts.push_back(batch_mean(g, bpr, n));
        out.parts.bpr = scalar_of(g, parts.back());
    }
    if (!con.empty()) {
        const Var c = batch_mean(g, con, n);
        out.parts.contrastive = scalar_of(g, c);
        parts.push_back(g.scale(c, static_cast<T>(settings.alpha)));
    }
    out.parts.contrastive_skipped = skipped;
    if (parts.empty()) {
        out.total = g.constant(Tensor<T>::scalar(T(0)));
    } else {
        out.total = parts.size() == 1 ? parts[0] : g.sum(g.concat_cols(parts));
    }
    out.parts.total = scalar_of(g, out.total);
    return out;
}

template <class T>
RankedList rank_user(Seq2SeqModel<T>& model, const GidTrie& trie, const InteractionDataset& dataset,
                     const Vocabulary& vocab, const InputConfig& input, std::size_t user, std::uint64_t seed,
                     std::size_t beam, std::size_t topn) {
    Rng rng(mix_seed(seed, user));
    const TokenSeq x = build_user_input(user, dataset, vocab, input, rng);
    const auto state = model.encode_state(x);
    return constrained_beam_search(trie, model_scorer(model, state), beam, topn);
}

template <class T>
TrainResult train_model(Seq2SeqModel<T>& model, const InteractionDataset& dataset, const Vocabulary& vocab,
                        const GidAssignment& gids, const TrainConfig& config, const EpochCallback& on_epoch) {
    if (config.batch_size == 0) throw Error(ErrorKind::config, "batch_size must be >= 1");
    if (gids.length() != model.config().gid_length || gids.k() != model.config().codebook_size) {
        throw Error(ErrorKind::shape, "GID (K, l) does not match the model");
    }
    const ExampleSampler sampler(dataset, vocab, gids, config.input, config.loss.toggles);
    std::vector<Edge> pairs;
    for (std::size_t e = 0; e < dataset.edges().size(); ++e) {
        if (dataset.labels()[e] == Split::train) pairs.push_back(dataset.edges()[e]);
    }
    if (pairs.empty()) throw Error(ErrorKind::invalid_argument, "dataset has no train interactions");

    AdamW<T> optimizer(config.optimizer, model.parameters());
    const GidTrie trie = GidTrie::build(gids);
    const UserSegmentation segments = segment_users(dataset);
    const bool validate = config.validate && dataset.count(Split::val) > 0;

    TrainResult result;
    std::vector<Tensor<T>> best = model.snapshot();
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<Tensor<T>> last_good = model.snapshot();
        Rng rng(mix_seed(config.seed, 0x7A000000ULL + epoch));
        rng.shuffle(pairs);
        EpochRecord record;
        record.epoch = epoch;
        std::size_t n_batches = 0;
        for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
            const std::size_t end = std::min(pairs.size(), start + config.batch_size);
            std::vector<TrainingExample> batch;
            batch.reserve(end - start);
            for (std::size_t k = start; k < end; ++k) batch.push_back(sampler.make(pairs[k].user, pairs[k].item, rng));
            Graph<T> g;
            const JointLoss<T> loss = joint_loss(model, g, batch, config.loss);
            if (!std::isfinite(loss.parts.total)) {
                model.restore(last_good);
                throw Error(ErrorKind::numeric, "non-finite training loss at epoch " + std::to_string(epoch) +
                                                    ", batch " + std::to_string(n_batches + 1));
            }
            optimizer.zero_grad();
            g.backward(loss.total);
            optimizer.step();
            record.loss.rec += loss.parts.rec;
            record.loss.index += loss.parts.index;
            record.loss.bpr += loss.parts.bpr;
            record.loss.contrastive += loss.parts.contrastive;
            record.loss.total += loss.parts.total;
            record.loss.contrastive_skipped += loss.parts.contrastive_skipped;
            ++n_batches;
        }
        const double inv = 1.0 / static_cast<double>(n_batches);
        record.loss.rec *= inv;
        record.loss.index *= inv;
        record.loss.bpr *= inv;
        record.loss.contrastive *= inv;
        record.loss.total *= inv;

        if (validate) {
            EvalOptions opts;
            opts.cutoffs = {5};
            opts.repeats = 1;
            opts.seed = mix_seed(config.seed, 0x7A11D);
            opts.truth = Split::val;
            opts.filter_train = true;
            opts.filter_val = false;
            const auto report = evaluate(dataset, segments,
                                         model_ranker(model, trie, dataset, vocab, config.input, config.beam), opts);
            record.val_recall = report.row("overall", 5).recall;
            if (!(record.val_recall <= result.best_val_recall)) {
                result.best_val_recall = record.val_recall;
                result.best_epoch = epoch;
                best = model.snapshot();
                since_best = 0;
            } else {
                ++since_best;
            }
        } else {
            result.best_epoch = epoch;
        }
        result.trace.push_back(record);
        const bool keep_going = !on_epoch || on_epoch(record);
        if (validate && since_best >= config.patience) {
            result.early_stopped = true;
            break;
        }
        if (!keep_going) break;
    }
    if (validate) model.restore(best);
    return result;
}

template JointLoss<float> joint_loss(Seq2SeqModel<float>&, Graph<float>&, std::span<const TrainingExample>,
                                     const LossSettings&);
template JointLoss<double> joint_loss(Seq2SeqModel<double>&, Graph<double>&, std::span<const TrainingExample>,
                                      const LossSettings&);
template RankedList rank_user(Seq2SeqModel<float>&, const GidTrie&, const InteractionDataset&, const Vocabulary&,
                              const InputConfig&, std::size_t, std::uint64_t, std::size_t, std::size_t);
template RankedList rank_user(Seq2SeqModel<double>&, const GidTrie&, const InteractionDataset&, const Vocabulary&,
                              const InputConfig&, std::size_t, std::uint64_t, std::size_t, std::size_t);
template TrainResult train_model(Seq2SeqModel<float>&, const InteractionDataset&, const Vocabulary&,
                                 const GidAssignment&, const TrainConfig&, const EpochCallback&);
template TrainResult train_model(Seq2SeqModel<double>&, const InteractionDataset&, const Vocabulary&,
                                 const GidAssignment&, const TrainConfig&, const EpochCallback&);

}  // namespace colarec
