// Command-line front end: one subcommand per pipeline stage.

#include <algorithm>
#include <deque>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "colarec/error.hpp"
#include "colarec/io.hpp"
#include "colarec/pipeline.hpp"

using namespace colarec;

namespace {

struct Alias {
    std::string flag;
    std::string key;
};

struct Stage {
    CLI::App* app = nullptr;
    std::string config_path;
    std::map<std::string, std::string> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;
};

Stage& add_stage(CLI::App& app, std::deque<Stage>& stages, const std::string& name, const std::string& help,
                 const std::vector<std::string>& keys, const std::vector<Alias>& aliases = {}) {
    Stage& s = stages.emplace_back();
    s.app = app.add_subcommand(name, help);
    s.app->add_option("--config", s.config_path, "flat key = value file; flags win over it");
    std::vector<std::string> taken;
    for (const auto& a : aliases) taken.push_back(a.flag);
    for (const auto& key : keys) {
        const ConfigKey* k = find_config_key(key);
        std::string names;
        const std::string own = kebab(key);
        if (std::find(taken.begin(), taken.end(), own) == taken.end()) names = "--" + own;
        for (const auto& a : aliases) {
            if (a.key == key) names += (names.empty() ? "--" : ",--") + a.flag;
        }
        if (names.empty()) continue;
        auto* opt = s.app->add_option(names, s.values[key], k->help + " [" + k->default_value + "]");
        s.options.emplace_back(key, opt);
    }
    return s;
}

RunConfig resolve(const Stage& s) {
    RunConfig c;
    if (!s.config_path.empty()) c.merge_file(s.config_path);
    for (const auto& [key, opt] : s.options) {
        if (opt->count() > 0) c.set(key, s.values.at(key));
    }
    return c;
}

std::string escape(std::string_view text) {
    std::string out;
    for (char ch : text) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += (ch == '\n' || ch == '\r') ? ' ' : ch;
    }
    return out;
}

int fail(std::string_view kind, std::string_view message, int code) {
    std::cerr << "error kind=" << kind << " message=\"" << escape(message) << "\"" << std::endl;
    return code;
}

std::vector<std::string> concat(std::initializer_list<std::vector<std::string>> parts) {
    std::vector<std::string> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative recommendation pipeline: prepare data, pretrain CF embeddings, build GIDs, "
                 "train, recommend, evaluate and sweep."};
    app.require_subcommand(1);

    const std::vector<std::string> common{"run", "seed"};
    const std::vector<std::string> synth_keys{"synth_users", "synth_items", "synth_clusters", "synth_p_in",
                                              "synth_p_out", "min_degree"};
    const std::vector<std::string> cf_keys{"cf_dim", "cf_layers", "cf_epochs", "cf_batch_size", "cf_lr", "cf_reg"};
    const std::vector<std::string> gid_keys{"strategy", "gid_length", "clusters", "kmeans_restarts",
                                            "kmeans_iterations"};
    const std::vector<std::string> input_keys{"items_per_user", "max_len", "use_content"};
    const std::vector<std::string> model_keys{"precision", "dim", "heads", "ff_dim", "encoder_layers",
                                              "decoder_layers", "init_scale"};
    const std::vector<std::string> train_keys{"lr",       "weight_decay", "batch_size", "epochs",
                                              "patience", "validate",     "alpha",      "loss_rec",
                                              "loss_index", "loss_bpr",   "loss_contrastive", "beam"};

    std::deque<Stage> stages;
    std::string synth_out;
    Stage& synth = add_stage(app, stages, "synth", "write a planted-cluster synthetic dataset",
                             concat({{"seed"}, synth_keys}));
    synth.app->alias("make-synthetic");
    synth.app->add_option("--out", synth_out, "output directory")->required();

    Stage& prepare = add_stage(app, stages, "prepare", "ingest, k-core filter and split raw data",
                               concat({common, {"interactions", "content", "data_dir", "min_degree", "split"}}),
                               {{"data", "data_dir"}, {"out", "data_dir"}});
    Stage& pretrain = add_stage(app, stages, "pretrain-cf", "train LightGCN and export item embeddings",
                                concat({common, {"data_dir", "cf_ckpt"}, cf_keys}),
                                {{"data", "data_dir"},
                                 {"out", "cf_ckpt"},
                                 {"dim", "cf_dim"},
                                 {"layers", "cf_layers"},
                                 {"epochs", "cf_epochs"},
                                 {"batch-size", "cf_batch_size"},
                                 {"lr", "cf_lr"},
                                 {"reg", "cf_reg"}});
    Stage& build = add_stage(app, stages, "build-gid", "assign generative identifiers",
                             concat({common, {"data_dir", "cf_ckpt", "gids_path"}, gid_keys}),
                             {{"data", "data_dir"}, {"cf", "cf_ckpt"}, {"out", "gids_path"}});
    Stage& train = add_stage(app, stages, "train", "train the encoder-decoder under the joint loss",
                             concat({common, {"data_dir", "gids_path", "model_ckpt"}, model_keys, input_keys,
                                     train_keys}),
                             {{"data", "data_dir"}, {"gids", "gids_path"}, {"out", "model_ckpt"}});
    Stage& recommend = add_stage(app, stages, "recommend", "top-n items for one user by constrained beam search",
                                 concat({common, {"data_dir", "gids_path", "model_ckpt", "precision", "beam", "topn"},
                                         input_keys}),
                                 {{"data", "data_dir"}, {"gids", "gids_path"}, {"ckpt", "model_ckpt"}});
    std::size_t user = 0;
    recommend.app->add_option("--user", user, "user index")->required();
    Stage& evaluate = add_stage(app, stages, "evaluate", "Recall@n and NDCG@n on the test split",
                                concat({common, {"data_dir", "gids_path", "model_ckpt", "report_path", "precision",
                                                 "beam", "repeats"},
                                        input_keys}),
                                {{"data", "data_dir"}, {"gids", "gids_path"}, {"ckpt", "model_ckpt"},
                                 {"out", "report_path"}});
    Stage& sweep = add_stage(app, stages, "sweep", "vary one setting and tabulate overall metrics",
                             concat({common, {"data_dir", "cf_ckpt", "sweep_path", "axis", "values", "repeats"},
                                     cf_keys, gid_keys, model_keys, input_keys, train_keys}),
                             {{"data", "data_dir"}, {"out", "sweep_path"}});

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return fail("usage", e.what(), 2);
    }

    try {
        std::ostream& log = std::cerr;
        if (synth.app->parsed()) {
            run_synthetic(resolve(synth), synth_out, log);
        } else if (prepare.app->parsed()) {
            run_prepare(resolve(prepare), log);
        } else if (pretrain.app->parsed()) {
            run_pretrain_cf(resolve(pretrain), log);
        } else if (build.app->parsed()) {
            run_build_gid(resolve(build), log);
        } else if (train.app->parsed()) {
            run_train(resolve(train), log);
        } else if (recommend.app->parsed()) {
            const auto list = run_recommend(resolve(recommend), user, log);
            for (std::size_t r = 0; r < list.size(); ++r) {
                std::cout << r + 1 << '\t' << list[r].item << '\t' << io::format_double(list[r].score) << '\n';
            }
        } else if (evaluate.app->parsed()) {
            run_evaluate(resolve(evaluate), log);
        } else if (sweep.app->parsed()) {
            run_sweep(resolve(sweep), log);
        }
    } catch (const Error& e) {
        return fail(to_string(e.kind()), e.what(), 1);
    } catch (const std::exception& e) {
        return fail("internal", e.what(), 1);
    }
    return 0;
}
