#include "colarec/pipeline.hpp"

#include <cmath>
#include <ostream>
#include <sstream>

#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/lightgcn.hpp"
#include "colarec/synthetic.hpp"

namespace colarec {

namespace {

std::filesystem::path or_default(const RunConfig& c, const std::string& key, const std::filesystem::path& fallback) {
    const auto& v = c.text(key);
    return v.empty() ? fallback : std::filesystem::path(v);
}

template <class F>
auto with_precision(const RunConfig& c, F&& f) {
    switch (c.integer("precision")) {
        case 32: return f.template operator()<float>();
        case 64: return f.template operator()<double>();
        default: throw Error(ErrorKind::config, "precision must be 32 or 64");
    }
}

InteractionDataset load_data(const RunPaths& p) {
    io::require_file(p.data / "split.tsv", "prepared data (run prepare first)");
    return InteractionDataset::load(p.data);
}

GidAssignment load_gids(const RunPaths& p) {
    io::require_file(p.gids, "GID file (run build-gid first)");
    return GidAssignment::load(p.gids);
}

template <class T>
Seq2SeqModel<T> load_model(const RunPaths& p, const Vocabulary& vocab, const GidAssignment& gids) {
    io::require_file(p.model, "model checkpoint (run train first)");
    auto model = Seq2SeqModel<T>::from_checkpoint(Checkpoint::load(p.model));
    const auto& mc = model.config();
    if (mc.vocab_size != vocab.size()) {
        throw Error(ErrorKind::format, p.model.string() + ": vocabulary size " + std::to_string(mc.vocab_size) +
                                           " does not match the prepared data (" + std::to_string(vocab.size()) +
                                           ")");
    }
    if (mc.gid_length != gids.length() || mc.codebook_size != gids.k()) {
        throw Error(ErrorKind::format, p.model.string() + ": (K, l) does not match " + p.gids.string());
    }
    return model;
}

InputConfig input_config(const RunConfig& c) {
    InputConfig in;
    in.items_per_user = c.count("items_per_user");
    in.max_len = c.count("max_len");
    in.use_content = c.flag("use_content");
    return in;
}

std::uint64_t seed_of(const RunConfig& c) { return static_cast<std::uint64_t>(c.integer("seed")); }

}  // namespace

RunPaths run_paths(const RunConfig& c) {
    RunPaths p;
    p.run = c.text("run");
    p.data = or_default(c, "data_dir", p.run / "data");
    p.cf = or_default(c, "cf_ckpt", p.run / "cf.ckpt");
    p.gids = or_default(c, "gids_path", p.run / "gids.tsv");
    p.model = or_default(c, "model_ckpt", p.run / "model.ckpt");
    p.report = or_default(c, "report_path", p.run / "report.tsv");
    p.sweep = or_default(c, "sweep_path", p.run / "sweep.tsv");
    p.train_log = p.model.parent_path() / (p.model.stem().string() + ".log.tsv");
    return p;
}

SplitRatios split_ratios(const RunConfig& c) {
    const auto parts = io::split(c.text("split"), ',');
    if (parts.size() != 3) throw Error(ErrorKind::config, "split expects three comma-separated ratios");
    double r[3];
    for (int k = 0; k < 3; ++k) {
        try {
            r[k] = std::stod(std::string(io::trim(parts[k])));
        } catch (const std::exception&) {
            throw Error(ErrorKind::config, "split ratio '" + std::string(parts[k]) + "' is not a number");
        }
        if (!(r[k] >= 0.0)) throw Error(ErrorKind::config, "split ratios must be >= 0");
    }
    return {r[0], r[1], r[2]};
}

CfConfig cf_config(const RunConfig& c) {
    CfConfig cf;
    cf.dim = c.count("cf_dim");
    cf.layers = c.count("cf_layers");
    cf.epochs = c.count("cf_epochs");
    cf.batch_size = c.count("cf_batch_size");
    cf.lr = c.real("cf_lr");
    cf.reg = c.real("cf_reg");
    cf.seed = seed_of(c);
    return cf;
}

TrainConfig train_config(const RunConfig& c) {
    TrainConfig t;
    t.loss.alpha = c.real("alpha");
    t.loss.toggles = {c.flag("loss_rec"), c.flag("loss_index"), c.flag("loss_bpr"), c.flag("loss_contrastive")};
    t.input = input_config(c);
    t.optimizer.lr = c.real("lr");
    t.optimizer.weight_decay = c.real("weight_decay");
    t.batch_size = c.count("batch_size");
    t.epochs = c.count("epochs");
    t.patience = c.count("patience");
    t.validate = c.flag("validate");
    t.beam = c.count("beam");
    t.seed = seed_of(c);
    return t;
}

ModelConfig model_config(const RunConfig& c, std::size_t vocab_size, const GidAssignment& gids) {
    ModelConfig m;
    m.vocab_size = vocab_size;
    m.dim = c.count("dim");
    m.heads = c.count("heads");
    m.ff_dim = c.count("ff_dim");
    m.encoder_layers = c.count("encoder_layers");
    m.decoder_layers = c.count("decoder_layers");
    m.gid_length = gids.length();
    m.codebook_size = gids.k();
    m.max_len = c.count("max_len");
    m.init_scale = c.real("init_scale");
    m.validate();
    return m;
}

void run_synthetic(const RunConfig& c, const std::filesystem::path& dir, std::ostream& log) {
    SyntheticConfig s;
    s.n_users = c.count("synth_users");
    s.n_items = c.count("synth_items");
    s.n_clusters = c.count("synth_clusters");
    s.p_in = c.real("synth_p_in");
    s.p_out = c.real("synth_p_out");
    s.min_degree = c.count("min_degree");
    s.seed = seed_of(c);
    const auto data = make_synthetic(s);
    write_synthetic(data, dir);
    log << "[synth] " << data.records.size() << " interactions, " << s.n_users << " users, " << s.n_items
        << " items -> " << dir.string() << "\n";
}

void run_prepare(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    if (c.text("interactions").empty()) throw Error(ErrorKind::config, "prepare needs key 'interactions'");
    if (c.text("content").empty()) throw Error(ErrorKind::config, "prepare needs key 'content'");
    const RawData raw = ingest(c.text("interactions"), c.text("content"));
    for (const auto& w : raw.warnings) log << "[prepare] warning: " << w << "\n";
    const auto kept = filter_kcore(raw.records, c.count("min_degree"));
    if (kept.empty()) throw Error(ErrorKind::invalid_argument, "no interactions survive k-core filtering");
    std::vector<std::string> notes;
    const auto dataset =
        InteractionDataset::from_records(kept, raw.content).with_split(split_ratios(c), seed_of(c), &notes);
    for (const auto& n : notes) log << "[prepare] " << n << "\n";
    dataset.save(p.data);
    log << "[prepare] " << raw.records.size() << " raw interactions, " << kept.size() << " after k-core; "
        << dataset.n_users() << " users, " << dataset.n_items() << " items; train/val/test "
        << dataset.count(Split::train) << "/" << dataset.count(Split::val) << "/" << dataset.count(Split::test)
        << " -> " << p.data.string() << "\n";
}

void run_pretrain_cf(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const auto dataset = load_data(p);
    const auto cfg = cf_config(c);
    const auto result = pretrain_cf(dataset, cfg, [&](std::size_t epoch, double loss) {
        if (epoch % 10 == 0 || epoch == cfg.epochs) {
            log << "[pretrain-cf] epoch " << epoch << " bpr " << io::format_fixed(loss, 6) << "\n";
        }
    });
    result.embeddings.save(p.cf);
    log << "[pretrain-cf] " << cfg.dim << "-d embeddings -> " << p.cf.string() << "\n";
}

void run_build_gid(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const auto dataset = load_data(p);
    const auto strategy = parse_gid_strategy(c.text("strategy"));
    const std::size_t k = c.count("clusters");
    const std::size_t l = c.count("gid_length");
    const std::uint64_t seed = seed_of(c);
    KMeansOptions opts;
    opts.restarts = c.count("kmeans_restarts");
    opts.max_iterations = c.count("kmeans_iterations");
    GidAssignment gids;
    switch (strategy) {
        case GidStrategy::collaborative: {
            io::require_file(p.cf, "CF checkpoint (run pretrain-cf first)");
            const auto emb = CfEmbeddings::load(p.cf);
            if (emb.items.rows() != dataset.n_items()) {
                throw Error(ErrorKind::format, p.cf.string() + " holds " + std::to_string(emb.items.rows()) +
                                                   " items, data has " + std::to_string(dataset.n_items()));
            }
            gids = build_collaborative(emb.items, k, l, seed, opts);
            break;
        }
        case GidStrategy::content: gids = build_content(content_vectors(dataset), k, l, seed, opts); break;
        case GidStrategy::random: gids = build_random(dataset.n_items(), k, l, seed); break;
        case GidStrategy::iad: gids = build_iad(dataset.n_items()); break;
    }
    gids.save(p.gids);
    log << "[build-gid] " << to_string(strategy) << " K=" << gids.k() << " l=" << gids.length() << " for "
        << gids.n_items() << " items -> " << p.gids.string() << "\n";
}

TrainResult run_train(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const auto dataset = load_data(p);
    const auto gids = load_gids(p);
    if (gids.n_items() != dataset.n_items()) {
        throw Error(ErrorKind::format, p.gids.string() + " covers " + std::to_string(gids.n_items()) +
                                           " items, data has " + std::to_string(dataset.n_items()));
    }
    const auto vocab = Vocabulary::build(dataset);
    const auto mc = model_config(c, vocab.size(), gids);
    const auto tc = train_config(c);
    return with_precision(c, [&]<class T>() {
        Seq2SeqModel<T> model(mc, mix_seed(tc.seed, 0x30DE1));
        const auto save_model = [&] {
            Checkpoint ckpt = model.to_checkpoint();
            ckpt.add(NamedTensor::scalar("meta/precision", static_cast<double>(sizeof(T) * 8)));
            ckpt.save(p.model);
        };
        TrainResult result;
        try {
            result = train_model(model, dataset, vocab, gids, tc, [&](const EpochRecord& r) {
                log << "[train] epoch " << r.epoch << " loss " << io::format_fixed(r.loss.total, 6) << " (rec "
                    << io::format_fixed(r.loss.rec, 4) << " index " << io::format_fixed(r.loss.index, 4) << " bpr "
                    << io::format_fixed(r.loss.bpr, 4) << " c " << io::format_fixed(r.loss.contrastive, 4) << ")";
                if (!std::isnan(r.val_recall)) log << " val R@5 " << io::format_fixed(r.val_recall, 4);
                log << "\n";
                return true;
            });
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::numeric) {
                save_model();
                log << "[train] last good parameters saved to " << p.model.string() << "\n";
            }
            throw;
        }
        save_model();
        std::ostringstream trace;
        trace << "epoch\trec\tindex\tbpr\tcontrastive\ttotal\tval_recall@5\n";
        for (const auto& r : result.trace) {
            trace << r.epoch << "\t" << io::format_double(r.loss.rec) << "\t" << io::format_double(r.loss.index)
                  << "\t" << io::format_double(r.loss.bpr) << "\t" << io::format_double(r.loss.contrastive) << "\t"
                  << io::format_double(r.loss.total) << "\t"
                  << (std::isnan(r.val_recall) ? std::string("nan") : io::format_double(r.val_recall)) << "\n";
        }
        io::write_text_atomic(p.train_log, trace.str());
        log << "[train] best epoch " << result.best_epoch << (result.early_stopped ? " (early stop)" : "")
            << " -> " << p.model.string() << "\n";
        return result;
    });
}

RankedList run_recommend(const RunConfig& c, std::size_t user, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const auto dataset = load_data(p);
    if (user >= dataset.n_users()) {
        throw Error(ErrorKind::invalid_argument,
                    "user " + std::to_string(user) + " out of range [0, " + std::to_string(dataset.n_users()) + ")");
    }
    const auto gids = load_gids(p);
    const auto vocab = Vocabulary::build(dataset);
    const auto trie = GidTrie::build(gids);
    return with_precision(c, [&]<class T>() {
        auto model = load_model<T>(p, vocab, gids);
        const auto list = rank_user(model, trie, dataset, vocab, input_config(c), user, seed_of(c),
                                    c.count("beam"), c.count("topn"));
        log << "[recommend] user " << user << ": " << list.size() << " items\n";
        return list;
    });
}

EvalReport run_evaluate(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const auto dataset = load_data(p);
    const auto gids = load_gids(p);
    const auto vocab = Vocabulary::build(dataset);
    const auto trie = GidTrie::build(gids);
    const auto segments = segment_users(dataset);
    EvalOptions opts;
    opts.repeats = c.count("repeats");
    opts.seed = seed_of(c);
    auto report = with_precision(c, [&]<class T>() {
        auto model = load_model<T>(p, vocab, gids);
        return evaluate(dataset, segments, model_ranker(model, trie, dataset, vocab, input_config(c), c.count("beam")),
                        opts);
    });
    report.metadata.insert(report.metadata.begin(), {{"config_hash", c.hash()},
                                                     {"strategy", std::string(to_string(gids.strategy()))},
                                                     {"K", std::to_string(gids.k())},
                                                     {"l", std::to_string(gids.length())},
                                                     {"beam", std::to_string(c.count("beam"))},
                                                     {"head_users", std::to_string(segments.head.size())},
                                                     {"tail_users", std::to_string(segments.tail.size())}});
    report.save(p.report);
    const auto& r20 = report.row("overall", 20);
    log << "[evaluate] Recall@20 " << io::format_fixed(r20.recall, 4) << " NDCG@20 " << io::format_fixed(r20.ndcg, 4)
        << " over " << r20.users << " users -> " << p.report.string() << "\n";
    return report;
}

std::vector<std::string> sweep_values(const std::string& axis, const std::string& values) {
    std::vector<std::string> out;
    for (auto v : io::split(values, ',')) {
        v = io::trim(v);
        if (!v.empty()) out.emplace_back(v);
    }
    if (axis == "variants") {
        if (!out.empty()) throw Error(ErrorKind::config, "axis variants takes no values");
        return {"full", "no-content", "no-index", "no-bpr", "no-contrastive", "iad", "random", "content"};
    }
    if (!out.empty()) return out;
    if (axis == "gid-length") return {"1", "2", "3", "4"};
    if (axis == "clusters") return {"32", "64", "96", "128"};
    if (axis == "gid-type") return {"collaborative", "content", "random", "iad"};
    if (axis == "ablation") return {"full", "no-content", "no-index", "no-bpr", "no-contrastive"};
    throw Error(ErrorKind::config, "unknown sweep axis '" + axis + "'");
}

RunConfig sweep_variant(const RunConfig& base, const std::string& axis, const std::string& value,
                        std::size_t n_items) {
    RunConfig v = base;
    const auto variant = [&](const std::string& name) {
        if (name == "full") return;
        if (name == "no-content") return v.set("use_content", "false");
        if (name == "no-index") return v.set("loss_index", "false");
        if (name == "no-bpr") return v.set("loss_bpr", "false");
        if (name == "no-contrastive") return v.set("loss_contrastive", "false");
        if (axis == "variants") return v.set("strategy", std::string(to_string(parse_gid_strategy(name))));
        throw Error(ErrorKind::config, "unknown ablation variant '" + name + "'");
    };
    if (axis == "gid-length") {
        v.set("gid_length", value);
        const std::size_t l = v.count("gid_length");
        if (l == 0) throw Error(ErrorKind::config, "gid-length values must be >= 1");
        // smallest K that still fits every item at this length
        std::size_t k = std::max<std::size_t>(2, v.count("clusters"));
        while (true) {
            const auto cap = gid_capacity(k, l);
            if (!cap || *cap >= n_items) break;
            ++k;
        }
        v.set("clusters", std::to_string(k));
    } else if (axis == "clusters") {
        v.set("clusters", value);
    } else if (axis == "gid-type") {
        v.set("strategy", std::string(to_string(parse_gid_strategy(value))));
    } else if (axis == "ablation" || axis == "variants") {
        variant(value);
    } else {
        throw Error(ErrorKind::config, "unknown sweep axis '" + axis + "'");
    }
    return v;
}

std::string sweep_table(const std::vector<SweepRow>& rows, const RunConfig& c) {
    std::ostringstream out;
    out << "# axis=" << c.text("axis") << "\n# config_hash=" << c.hash() << "\n# segment=overall\n";
    out << "axis\tvalue\trecall@5\tndcg@5\trecall@10\tndcg@10\trecall@20\tndcg@20\tusers\n";
    for (const auto& r : rows) {
        out << r.axis << "\t" << r.value;
        for (std::size_t n : {5, 10, 20}) {
            const auto& m = r.report.row("overall", n);
            out << "\t" << io::format_fixed(m.recall, 6) << "\t" << io::format_fixed(m.ndcg, 6);
        }
        out << "\t" << r.report.row("overall", 20).users << "\n";
    }
    return out.str();
}

std::vector<SweepRow> run_sweep(const RunConfig& c, std::ostream& log) {
    const RunPaths p = run_paths(c);
    const std::string axis = c.text("axis");
    if (axis.empty()) throw Error(ErrorKind::config, "sweep needs key 'axis'");
    const auto dataset = load_data(p);
    const auto values = sweep_values(axis, c.text("values"));

    std::vector<SweepRow> rows;
    for (const auto& value : values) {
        RunConfig v = sweep_variant(c, axis, value, dataset.n_items());
        if (parse_gid_strategy(v.text("strategy")) == GidStrategy::collaborative &&
            !std::filesystem::exists(p.cf)) {
            log << "[sweep] " << p.cf.string() << " missing, pretraining it first\n";
            run_pretrain_cf(c, log);
        }
        const auto dir = p.run / "sweep" / (axis + "-" + value);
        v.set("run", dir.string());
        v.set("data_dir", p.data.string());
        v.set("cf_ckpt", p.cf.string());
        v.set("gids_path", "");
        v.set("model_ckpt", "");
        v.set("report_path", "");
        log << "[sweep] " << axis << "=" << value << "\n";
        run_build_gid(v, log);
        run_train(v, log);
        rows.push_back({axis, value, run_evaluate(v, log)});
    }
    io::write_text_atomic(p.sweep, sweep_table(rows, c));
    log << "[sweep] " << rows.size() << " rows -> " << p.sweep.string() << "\n";
    return rows;
}

}  // namespace colarec
