#include "colarec/lightgcn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "colarec/adamw.hpp"
#include "colarec/checkpoint.hpp"
#include "colarec/error.hpp"
#include "colarec/parallel.hpp"
#include "colarec/rng.hpp"

namespace colarec {

BipartiteGraph BipartiteGraph::from_edges(std::size_t n_users, std::size_t n_items,
                                          std::span<const Edge> edges) {
    BipartiteGraph g;
    g.n_users = n_users;
    g.n_items = n_items;
    const std::size_t n = n_users + n_items;
    g.degree.assign(n, 0);
    for (const auto& e : edges) {
        if (e.user >= n_users || e.item >= n_items) {
            throw Error(ErrorKind::invalid_argument, "edge index out of range");
        }
        ++g.degree[e.user];
        ++g.degree[n_users + e.item];
    }
    g.row_ptr.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) g.row_ptr[v + 1] = g.row_ptr[v] + g.degree[v];
    g.col.resize(g.row_ptr[n]);
    g.weight.resize(g.row_ptr[n]);
    std::vector<std::size_t> fill(g.row_ptr.begin(), g.row_ptr.end() - 1);
    for (const auto& e : edges) {
        const std::size_t u = e.user;
        const std::size_t i = n_users + e.item;
        const double w = 1.0 / std::sqrt(static_cast<double>(g.degree[u] * g.degree[i]));
        g.col[fill[u]] = static_cast<std::uint32_t>(i);
        g.weight[fill[u]++] = w;
        g.col[fill[i]] = static_cast<std::uint32_t>(u);
        g.weight[fill[i]++] = w;
    }
    return g;
}

BipartiteGraph BipartiteGraph::from_dataset(const InteractionDataset& dataset) {
    std::vector<Edge> train;
    for (std::size_t e = 0; e < dataset.edges().size(); ++e) {
        if (dataset.labels()[e] == Split::train) train.push_back(dataset.edges()[e]);
    }
    return from_edges(dataset.n_users(), dataset.n_items(), train);
}

Tensor<double> propagate(const BipartiteGraph& graph, const Tensor<double>& e0, std::size_t n_layers) {
    if (e0.rows() != graph.n_nodes()) {
        throw Error(ErrorKind::shape, "embedding rows " + std::to_string(e0.rows()) +
                                          " do not match graph nodes " + std::to_string(graph.n_nodes()));
    }
    const std::size_t d = e0.cols();
    Tensor<double> total = e0;
    Tensor<double> current = e0;
    Tensor<double> next(e0.shape(), 0.0);
    for (std::size_t layer = 0; layer < n_layers; ++layer) {
        parallel_for(graph.n_nodes(), [&](std::size_t v) {
            auto out = next.row(v);
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t p = graph.row_ptr[v]; p < graph.row_ptr[v + 1]; ++p) {
                const auto in = current.row(graph.col[p]);
                const double w = graph.weight[p];
                for (std::size_t c = 0; c < d; ++c) out[c] += w * in[c];
            }
        });
        std::swap(current, next);
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += current[k];
    }
    const double inv = 1.0 / static_cast<double>(n_layers + 1);
    for (auto& v : total.values()) v *= inv;
    return total;
}

Tensor<double> init_cf_table(std::size_t n_nodes, std::size_t dim, double std, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0xCF));
    Tensor<double> t = Tensor<double>::matrix(n_nodes, dim);
    for (auto& v : t.values()) v = std * rng.normal();
    return t;
}

namespace {

CfEmbeddings split_table(const Tensor<double>& table, std::size_t n_users) {
    const std::size_t d = table.cols();
    const std::size_t n_items = table.rows() - n_users;
    CfEmbeddings out{Tensor<double>::matrix(n_users, d), Tensor<double>::matrix(n_items, d)};
    std::copy_n(table.data(), n_users * d, out.users.data());
    std::copy_n(table.data() + n_users * d, n_items * d, out.items.data());
    return out;
}

double log_sigmoid(double x) { return std::min(x, 0.0) - std::log1p(std::exp(-std::abs(x))); }

}  // namespace

CfTrainResult pretrain_cf(const InteractionDataset& dataset, const CfConfig& config,
                          const std::function<void(std::size_t, double)>& on_epoch) {
    const BipartiteGraph graph = BipartiteGraph::from_dataset(dataset);
    const std::size_t n_users = dataset.n_users();
    const std::size_t n_items = dataset.n_items();
    const std::size_t d = config.dim;

    Parameter<double> table("cf/table", init_cf_table(graph.n_nodes(), d, config.init_std, config.seed));
    AdamW<double> optimizer({config.lr, 0.9, 0.999, 1e-8, 0.0}, {&table});

    std::vector<Edge> train;
    for (std::size_t e = 0; e < dataset.edges().size(); ++e) {
        if (dataset.labels()[e] == Split::train) train.push_back(dataset.edges()[e]);
    }
    if (train.empty() && config.epochs > 0) throw Error(ErrorKind::invalid_argument, "no train edges");

    CfTrainResult result;
    Rng rng(mix_seed(config.seed, 0xB9));
    const std::size_t batch = std::max<std::size_t>(1, config.batch_size);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(train);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < train.size(); start += batch) {
            const std::size_t end = std::min(train.size(), start + batch);
            const double inv_b = 1.0 / static_cast<double>(end - start);
            const Tensor<double> final_emb = propagate(graph, table.value, config.layers);
            Tensor<double> g_final(final_emb.shape(), 0.0);
            table.zero_grad();
            double batch_loss = 0.0;
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t u = train[k].user;
                const std::size_t i = train[k].item;
                std::size_t j = rng.uniform_index(n_items);
                for (int tries = 0; dataset.has_train_edge(u, j) && tries < 100; ++tries) {
                    j = rng.uniform_index(n_items);
                }
                const auto eu = final_emb.row(u);
                const auto ei = final_emb.row(n_users + i);
                const auto ej = final_emb.row(n_users + j);
                double x = 0.0;
                for (std::size_t c = 0; c < d; ++c) x += eu[c] * (ei[c] - ej[c]);
                batch_loss -= log_sigmoid(x) * inv_b;
                // d(-log sigma(x))/dx = -sigma(-x)
                const double dx = -(1.0 / (1.0 + std::exp(x))) * inv_b;
                auto gu = g_final.row(u);
                auto gi = g_final.row(n_users + i);
                auto gj = g_final.row(n_users + j);
                for (std::size_t c = 0; c < d; ++c) {
                    gu[c] += dx * (ei[c] - ej[c]);
                    gi[c] += dx * eu[c];
                    gj[c] -= dx * eu[c];
                }
                // L2 on the layer-0 rows of the triple
                for (std::size_t row : {u, n_users + i, n_users + j}) {
                    auto w = table.value.row(row);
                    auto gw = table.grad.row(row);
                    for (std::size_t c = 0; c < d; ++c) {
                        batch_loss += 0.5 * config.reg * w[c] * w[c] * inv_b;
                        gw[c] += config.reg * w[c] * inv_b;
                    }
                }
            }
            // A is symmetric, so the adjoint of propagation is propagation.
            const Tensor<double> g0 = propagate(graph, g_final, config.layers);
            for (std::size_t k = 0; k < g0.size(); ++k) table.grad[k] += g0[k];
            if (!std::isfinite(batch_loss)) {
                throw Error(ErrorKind::numeric, "CF pretraining diverged at epoch " + std::to_string(epoch) +
                                                    " (loss is not finite)");
            }
            optimizer.step();
            epoch_loss += batch_loss * static_cast<double>(end - start);
        }
        epoch_loss /= static_cast<double>(train.size());
        result.epoch_loss.push_back(epoch_loss);
        if (on_epoch) on_epoch(epoch + 1, epoch_loss);
    }
    result.base = split_table(table.value, n_users);
    result.embeddings = split_table(propagate(graph, table.value, config.layers), n_users);
    return result;
}

void CfEmbeddings::save(const std::filesystem::path& path) const {
    Checkpoint ckpt;
    ckpt.add(NamedTensor::from("cf/users", users));
    ckpt.add(NamedTensor::from("cf/items", items));
    ckpt.save(path);
}

CfEmbeddings CfEmbeddings::load(const std::filesystem::path& path) {
    const Checkpoint ckpt = Checkpoint::load(path);
    CfEmbeddings e{ckpt.at("cf/users").to_tensor<double>(), ckpt.at("cf/items").to_tensor<double>()};
    if (e.users.rank() != 2 || e.items.rank() != 2 || e.users.cols() != e.items.cols()) {
        throw Error(ErrorKind::format, "malformed CF checkpoint: " + path.string());
    }
    return e;
}

}  // namespace colarec
