// Command-line surface: link, synth, train, parse, eval, gradcheck.

#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rasap/dataset.hpp"
#include "rasap/evaluator.hpp"
#include "rasap/sql_parse.hpp"
#include "rasap/synth.hpp"
#include "rasap/train.hpp"

namespace {

using namespace rasap;

constexpr int kExitNoParse = 2;

std::map<std::string, Schema> load_all_schemas(const std::string& tables,
                                               const std::string& cells,
                                               const std::string& db_dir) {
  auto schemas = load_schemas(tables);
  if (!db_dir.empty()) {
    auto dbs = load_databases(db_dir, schemas);
    for (auto& [id, schema] : schemas) {
      auto it = dbs.find(id);
      if (it != dbs.end()) derive_cells_from_database(schema, it->second);
    }
  }
  if (!cells.empty()) load_cells(cells, schemas);
  return schemas;
}

int cmd_link(const std::string& tables, const std::string& cells, const std::string& db_dir,
             const std::string& db_id, const std::string& question) {
  auto schemas = load_all_schemas(tables, cells, db_dir);
  auto it = schemas.find(db_id);
  if (it == schemas.end()) {
    std::cerr << "unknown db_id: " << db_id << "\n";
    return 1;
  }
  auto q = tokenize(question);
  auto m = build_relation_matrix(q, it->second);
  const int n = m.size();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      std::cout << m.node_name(i, it->second, q) << "\t" << m.node_name(j, it->second, q)
                << "\t" << relation_label_name(m.at(i, j)) << "\n";
  return 0;
}

int cmd_synth(const std::string& tables, const std::string& cells, const std::string& db_dir,
              std::uint64_t seed, int n, const std::string& out_path) {
  auto schemas = load_all_schemas(tables, cells, db_dir);
  auto examples = generate_synthetic(seed, n, schemas);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& ex : examples)
    arr.push_back(
        {{"db_id", ex.db_id}, {"question", ex.question}, {"query", ex.gold_sql}});
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 1;
  }
  out << arr.dump(2) << "\n";
  std::cout << "wrote " << examples.size() << " examples to " << out_path << "\n";
  return 0;
}

int cmd_train(const std::string& tables, const std::string& examples_path,
              const std::string& cells, const std::string& db_dir,
              const std::string& config_path, const std::vector<std::string>& overrides,
              const std::string& ckpt, const std::string& metrics_path) {
  TrainConfig cfg = TrainConfig::load_file(config_path);
  for (const auto& o : overrides) cfg.apply_override(o);
  Dataset ds = load_dataset(tables, examples_path);
  {
    auto enriched = load_all_schemas(tables, cells, db_dir);
    ds.schemas = std::move(enriched);
  }
  if (!ds.excluded.empty()) {
    std::cerr << ds.excluded.size() << " example(s) excluded:\n";
    for (const auto& [ex, why] : ds.excluded)
      std::cerr << "  [" << ex.db_id << "] " << ex.gold_sql << " -- " << why << "\n";
  }
  if (ds.examples.empty()) {
    std::cerr << "warning: empty corpus, nothing to train\n";
    return 1;
  }
  std::ofstream metrics(metrics_path);
  if (!metrics) {
    std::cerr << "cannot write " << metrics_path << "\n";
    return 1;
  }
  auto result = train(cfg, ds, ckpt, metrics, &std::cerr);
  std::cout << "steps: " << result.steps << "  best_em: " << result.best_em
            << (result.diverged ? "  DIVERGED" : "") << "\n";
  return result.diverged ? 1 : 0;
}

int cmd_parse(const std::string& ckpt, const std::string& tables, const std::string& cells,
              const std::string& db_dir, const std::string& db_id,
              const std::string& question, const std::string& trace_path, bool dump_trees) {
  Model model = Model::load(ckpt);
  auto schemas = load_all_schemas(tables, cells, db_dir);
  auto it = schemas.find(db_id);
  if (it == schemas.end()) {
    std::cerr << "unknown db_id: " << db_id << "\n";
    return 1;
  }
  try {
    auto q = tokenize(question);
    auto result = model.parse_question(q, it->second, nullptr, !trace_path.empty());
    if (!trace_path.empty()) {
      std::ofstream trace(trace_path);
      for (const auto& step : result.trace) {
        nlohmann::json items = nlohmann::json::array();
        for (const auto& [tree, score] : step.items)
          items.push_back({{"tree", tree->serial}, {"score", score}});
        trace << nlohmann::json{{"step", step.step}, {"items", items}}.dump() << "\n";
      }
    }
    if (dump_trees) std::cerr << result.tree->serial << "\n";
    if (!result.complete) {
      std::cerr << "no complete query on the final beam\n";
      return kExitNoParse;
    }
    std::cout << emit_sql(result.tree, it->second) << "\n";
    return 0;
  } catch (const NoParseError&) {
    std::cerr << "no parse\n";
    return kExitNoParse;
  }
}

int cmd_eval(const std::string& tables, const std::string& examples_path,
             const std::string& pred_path, const std::string& cells,
             const std::string& db_dir, const std::string& json_path) {
  auto schemas = load_all_schemas(tables, cells, db_dir);
  auto examples = load_examples_file(examples_path);
  std::map<std::string, MiniDatabase> dbs;
  if (!db_dir.empty()) dbs = load_databases(db_dir, schemas);

  std::ifstream preds(pred_path);
  if (!preds) {
    std::cerr << "cannot open predictions: " << pred_path << "\n";
    return 1;
  }
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(preds, line)) lines.push_back(line);
  if (lines.size() != examples.size()) {
    std::cerr << "prediction count " << lines.size() << " != example count "
              << examples.size() << "\n";
    return 1;
  }
  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    auto sit = schemas.find(examples[i].db_id);
    if (sit == schemas.end()) {
      std::cerr << "unknown db_id " << examples[i].db_id << " at example " << i << "\n";
      return 1;
    }
    EvalCase c;
    c.pred_sql = lines[i];
    c.gold_sql = examples[i].gold_sql;
    c.schema = &sit->second;
    auto dit = dbs.find(examples[i].db_id);
    c.db = dit == dbs.end() ? nullptr : &dit->second;
    cases.push_back(c);
  }
  auto report = evaluate_corpus(cases);
  std::cout << report.to_table();
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    out << report.to_json() << "\n";
  }
  return 0;
}

int cmd_gradcheck(const std::string& which);

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relation-aware semi-autoregressive text-to-SQL parser"};
  app.require_subcommand(1);

  std::string tables, cells, db_dir, db_id, question, out_path, examples_path;
  std::string config_path, ckpt, metrics_path = "metrics.jsonl", trace_path, json_path;
  std::string pred_path, which = "all";
  std::vector<std::string> overrides;
  std::uint64_t seed = 1;
  int n = 200;
  bool dump_trees = false;

  auto add_schema_opts = [&](CLI::App* cmd) {
    cmd->add_option("--tables", tables, "Spider-format tables.json")->required();
    cmd->add_option("--cells", cells, "cell-value sidecar JSON");
    cmd->add_option("--db-dir", db_dir, "directory of <db_id>.json fixtures");
  };

  auto* link = app.add_subcommand("link", "dump the relation matrix for a question");
  add_schema_opts(link);
  link->add_option("--db", db_id, "database id")->required();
  link->add_option("--question", question, "natural-language question")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  add_schema_opts(synth);
  synth->add_option("--seed", seed, "generator seed");
  synth->add_option("--n", n, "number of examples");
  synth->add_option("--out", out_path, "output examples JSON")->required();

  auto* train_cmd = app.add_subcommand("train", "train a parser");
  add_schema_opts(train_cmd);
  train_cmd->add_option("--examples", examples_path, "training examples JSON")->required();
  train_cmd->add_option("--config", config_path, "config JSON file");
  train_cmd->add_option("--set", overrides, "config override key=value")->take_all();
  train_cmd->add_option("--ckpt", ckpt, "checkpoint output path")->required();
  train_cmd->add_option("--metrics", metrics_path, "metrics JSONL output");

  auto* parse_cmd = app.add_subcommand("parse", "parse one question into SQL");
  add_schema_opts(parse_cmd);
  parse_cmd->add_option("--ckpt", ckpt, "checkpoint path")->required();
  parse_cmd->add_option("--db", db_id, "database id")->required();
  parse_cmd->add_option("--question", question, "natural-language question")->required();
  parse_cmd->add_option("--trace", trace_path, "write per-step beams as JSONL");
  parse_cmd->add_flag("--dump-trees", dump_trees, "print the decoded tree to stderr");

  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold SQL");
  add_schema_opts(eval_cmd);
  eval_cmd->add_option("--examples", examples_path, "gold examples JSON")->required();
  eval_cmd->add_option("--pred", pred_path, "predictions file, one SQL per line")
      ->required();
  eval_cmd->add_option("--json", json_path, "machine-readable report output");

  auto* gradcheck_cmd = app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck_cmd->add_option("--which", which, "rat | compose | loss | all");

  CLI11_PARSE(app, argc, argv);

  try {
    if (link->parsed()) return cmd_link(tables, cells, db_dir, db_id, question);
    if (synth->parsed()) return cmd_synth(tables, cells, db_dir, seed, n, out_path);
    if (train_cmd->parsed())
      return cmd_train(tables, examples_path, cells, db_dir, config_path, overrides, ckpt,
                       metrics_path);
    if (parse_cmd->parsed())
      return cmd_parse(ckpt, tables, cells, db_dir, db_id, question, trace_path, dump_trees);
    if (eval_cmd->parsed())
      return cmd_eval(tables, examples_path, pred_path, cells, db_dir, json_path);
    if (gradcheck_cmd->parsed()) return cmd_gradcheck(which);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

namespace {

int cmd_gradcheck(const std::string& which) {
  // Small fixed instances; thresholds match the test suite.
  Schema s;
  s.db_id = "toy";
  s.tables = {{"items", {"items"}}};
  s.columns = {
      {"id", {"id"}, 0, ColumnType::Number, true},
      {"name", {"name"}, 0, ColumnType::Text, false},
  };
  auto q = tokenize("names with id 3");
  std::vector<std::string> toks = q.tokens;
  for (const auto& c : s.columns)
    toks.insert(toks.end(), c.name_tokens.begin(), c.name_tokens.end());
  toks.emplace_back("items");
  auto vocab = Vocabulary::build(toks);

  EncoderConfig ecfg;
  ecfg.d_x = 8;
  ecfg.heads = 2;
  ecfg.n_layers = 1;
  ecfg.d_ff = 16;
  ecfg.dropout = 0.0;
  ecfg.vocab_size = vocab.size();
  DecoderConfig dcfg;
  dcfg.K = 5;
  dcfg.T = 3;
  dcfg.d_b = 8;
  dcfg.comp_heads = 2;
  dcfg.comp_ff = 16;
  dcfg.d_score = 8;

  auto rels = build_relation_matrix(q, s);
  bool ok = true;
  auto report = [&](const char* name, double err) {
    std::cout << name << ": max relative error " << err << (err <= 1e-4 ? "  ok" : "  FAIL")
              << "\n";
    if (err > 1e-4) ok = false;
  };
  auto boost = [](ParamStore& params) {
    for (const auto& [name, var] : params.params())
      if (name.rfind("emb.", 0) == 0 || name.find(".rk") != std::string::npos ||
          name.find(".rv") != std::string::npos)
        for (double& v : var->value.data) v *= 40.0;
  };
  auto probe = [](const ag::Var& y) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> norm(0.0, 1.0);
    Tensor m(y->value.shape);
    for (double& v : m.data) v = norm(rng);
    return ag::sum_all(ag::mul(y, ag::constant(m)));
  };

  if (which == "rat" || which == "all") {
    ParamStore params(8);
    init_encoder_params(params, ecfg);
    boost(params);
    report("rat-layer", grad_check(
                            [&] {
                              auto x = embed_initial(q, s, vocab, params, ecfg);
                              return probe(rat_layer(x, rels, params, ecfg, 0));
                            },
                            params, 1e-5, 6));
  }
  if (which == "compose" || which == "all") {
    ParamStore params(9);
    init_decoder_params(params, dcfg, ecfg.d_x);
    auto zi = params.make_embedding("probe.zi", 1, dcfg.d_b);
    auto zj = params.make_embedding("probe.zj", 1, dcfg.d_b);
    for (auto* v : {&zi, &zj})
      for (double& x : (*v)->value.data) x *= 40.0;
    report("compose+scoring", grad_check(
                                  [&] {
                                    auto out = compose(Rule::Gt, zi, zj, params, dcfg);
                                    return probe(out);
                                  },
                                  params, 1e-5, 8));
  }
  if (which == "loss" || which == "all") {
    ParamStore params(10);
    init_encoder_params(params, ecfg);
    init_decoder_params(params, dcfg, ecfg.d_x);
    boost(params);
    auto gold = parse_sql("SELECT name FROM items WHERE id = 3", s);
    report("training-loss", grad_check(
                                [&] {
                                  auto enc = encode(q, s, rels, vocab, params, ecfg);
                                  return training_loss(gold, enc, q, s, params, dcfg).loss;
                                },
                                params, 1e-5, 4));
  }
  return ok ? 0 : 1;
}

}  // namespace
