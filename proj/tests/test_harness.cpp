#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rasap/dataset.hpp"
#include "rasap/evaluator.hpp"
#include "rasap/optimizer.hpp"
#include "rasap/sql_parse.hpp"
#include "rasap/synth.hpp"
#include "rasap/train.hpp"

using namespace rasap;

namespace {

const char* kDataDir = RASAP_DATA_DIR;

std::string data_path(const char* name) { return std::string(kDataDir) + "/" + name; }

TrainConfig desk_config() {
  TrainConfig cfg;
  cfg.encoder.d_x = 16;
  cfg.encoder.heads = 2;
  cfg.encoder.n_layers = 1;
  cfg.encoder.d_ff = 32;
  cfg.encoder.dropout = 0.0;
  cfg.decoder.K = 8;
  cfg.decoder.T = 9;
  cfg.decoder.d_b = 16;
  cfg.decoder.comp_heads = 2;
  cfg.decoder.comp_ff = 32;
  cfg.decoder.d_score = 16;
  cfg.batch_size = 1;
  cfg.grad_accum = 1;
  cfg.lr_decoder = 2e-3;  // desk-scale speedup for smoke tests
  cfg.heldout_fraction = 0.0;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("harness");

TEST_CASE("config defaults mirror the published hyperparameters") {
  TrainConfig cfg;
  CHECK(cfg.decoder.K == 30);
  CHECK(cfg.decoder.T == 9);
  CHECK(cfg.encoder.dropout == 0.2);
  CHECK(cfg.encoder.heads == 8);
  CHECK(cfg.lr_encoder == 3e-6);
  CHECK(cfg.lr_decoder == 0.000186);
  CHECK(cfg.epochs == 520);
  CHECK(cfg.batch_size == 12);
  CHECK(cfg.grad_accum == 5);
  CHECK(cfg.decoder.d_b == 256);
  CHECK(cfg.decoder.comp_heads == 8);
}

TEST_CASE("config files load and overrides apply") {
  const char* path = "/tmp/rasap_cfg_test.json";
  {
    std::ofstream out(path);
    out << R"({"seed": 9, "decoder": {"K": 5}, "encoder": {"d_x": 32}})";
  }
  TrainConfig cfg = TrainConfig::load_file(path);
  CHECK(cfg.seed == 9);
  CHECK(cfg.decoder.K == 5);
  CHECK(cfg.encoder.d_x == 32);
  CHECK(cfg.decoder.T == 9);  // untouched default
  cfg.apply_override("decoder.T=4");
  cfg.apply_override("lr_decoder=0.001");
  CHECK(cfg.decoder.T == 4);
  CHECK(cfg.lr_decoder == 0.001);
  CHECK_THROWS_AS(cfg.apply_override("decoder.nope=1"), std::invalid_argument);
  std::remove(path);
}

TEST_CASE("bundled dataset loads with every example parsing") {
  Dataset ds = load_dataset(data_path("tables.json"), data_path("examples.json"));
  CHECK(ds.schemas.size() == 3);
  CHECK(ds.examples.size() == 10);
  CHECK(ds.excluded.empty());
  // spot-check schema wiring
  const Schema& book = ds.schemas.at("book_club");
  CHECK(book.tables.size() == 2);
  CHECK(book.columns.size() == 11);  // '*' dropped
  CHECK(book.columns[0].is_primary_key);
  REQUIRE(book.foreign_keys.size() == 1);
  CHECK(book.columns[book.foreign_keys[0].first].original_name == "book_club_id_fk");
}

TEST_CASE("database fixtures load and derive linking cells") {
  auto schemas = load_schemas(data_path("tables.json"));
  auto dbs = load_databases(data_path("dbs"), schemas);
  CHECK(dbs.size() == 3);
  Schema& cars = schemas.at("car_catalog");
  CHECK(cars.cell_values.empty());
  derive_cells_from_database(cars, dbs.at("car_catalog"));
  bool found = false;
  for (const auto& [col, values] : cars.cell_values)
    for (const auto& v : values)
      if (v == "amc hornet sportabout (sw)") found = true;
  CHECK(found);
}

TEST_CASE("cells sidecar attaches values to the right columns") {
  auto schemas = load_schemas(data_path("tables.json"));
  load_cells(data_path("cells.json"), schemas);
  const Schema& s = schemas.at("book_club");
  int category = -1;
  for (int c = 0; c < static_cast<int>(s.columns.size()); ++c)
    if (s.columns[c].original_name == "category") category = c;
  REQUIRE(s.cell_values.count(category));
  CHECK(s.cell_values.at(category).size() == 3);
}

TEST_CASE("empty examples file yields an empty corpus") {
  const char* path = "/tmp/rasap_empty_examples.json";
  {
    std::ofstream out(path);
    out << "[]";
  }
  Dataset ds = load_dataset(data_path("tables.json"), path);
  CHECK(ds.examples.empty());
  CHECK(ds.excluded.empty());
  std::remove(path);
}

TEST_CASE("examples with unknown databases or bad SQL are excluded with reasons") {
  const char* path = "/tmp/rasap_bad_examples.json";
  {
    std::ofstream out(path);
    out << R"([
      {"db_id": "nope", "question": "x ?", "query": "SELECT 1"},
      {"db_id": "book_club", "question": "x ?", "query": "SELECT category FROM book_club"},
      {"db_id": "book_club", "question": "x ?", "query": "DELETE FROM book_club"}
    ])";
  }
  Dataset ds = load_dataset(data_path("tables.json"), path);
  CHECK(ds.examples.size() == 1);
  REQUIRE(ds.excluded.size() == 2);
  CHECK(ds.excluded[0].second == "unknown db_id");
  std::remove(path);
}

TEST_CASE("malformed files raise errors naming the file") {
  const char* path = "/tmp/rasap_broken.json";
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_WITH_AS(load_examples_file(path), doctest::Contains("rasap_broken"),
                       std::runtime_error);
  std::remove(path);
}

TEST_CASE("synthetic generation is deterministic per seed") {
  auto schemas = load_schemas(data_path("tables.json"));
  auto a = generate_synthetic(11, 40, schemas);
  auto b = generate_synthetic(11, 40, schemas);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].question == b[i].question);
    CHECK(a[i].gold_sql == b[i].gold_sql);
  }
  auto c = generate_synthetic(12, 40, schemas);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].gold_sql != c[i].gold_sql) any_diff = true;
  CHECK(any_diff);
}

TEST_CASE("synthetic corpus covers every tree-materializable rule") {
  auto schemas = load_schemas(data_path("tables.json"));
  {
    auto dbs = load_databases(data_path("dbs"), schemas);
    for (auto& [id, schema] : schemas) derive_cells_from_database(schema, dbs.at(id));
  }
  auto examples = generate_synthetic(7, 200, schemas);
  REQUIRE(examples.size() == 200);
  std::map<Rule, int> counts;
  for (const auto& ex : examples) {
    const Schema& s = schemas.at(ex.db_id);
    TreePtr gold = parse_sql(ex.gold_sql, s);
    CHECK(gold->height <= 9);
    std::function<void(const TreePtr&)> walk = [&](const TreePtr& n) {
      counts[n->rule]++;
      if (n->left) walk(n->left);
      if (n->right) walk(n->right);
    };
    walk(gold);
  }
  // KEEP never materializes in a tree: it is the step-padding action.
  for (int r = 0; r < kNumRules; ++r) {
    const Rule rule = static_cast<Rule>(r);
    if (rule == Rule::Keep) continue;
    CHECK_MESSAGE(counts[rule] >= 1, "rule not covered: ", rule_name(rule));
  }
}

TEST_CASE("training loss at initialization is near the uniform-frontier entropy") {
  auto schemas = load_schemas(data_path("tables.json"));
  Dataset ds;
  ds.schemas = schemas;
  ds.examples = generate_synthetic(5, 4, schemas);
  TrainConfig cfg = desk_config();
  Vocabulary vocab = build_vocabulary(ds.schemas, ds.examples);
  Model model = Model::build(cfg, std::move(vocab));
  double total_loss = 0, total_expected = 0;
  for (const auto& ex : ds.examples) {
    const Schema& s = ds.schemas.at(ex.db_id);
    auto q = tokenize(ex.question);
    auto rels = build_relation_matrix(q, s);
    auto gold = parse_sql(ex.gold_sql, s);
    auto enc = encode(q, s, rels, model.vocab, *model.params, model.encoder);
    auto tl = training_loss(gold, enc, q, s, *model.params, model.decoder);
    total_loss += tl.loss->value.data[0];
    for (std::size_t t = 0; t < tl.frontier_sizes.size(); ++t)
      total_expected += tl.gold_counts[t] * std::log(tl.frontier_sizes[t]);
  }
  CHECK(std::fabs(total_loss - total_expected) / total_expected < 0.15);
}

TEST_CASE("training memorizes a single example") {
  auto schemas = load_schemas(data_path("tables.json"));
  Dataset ds;
  ds.schemas = schemas;
  ds.examples = {{"List the name of singer whose age is greater than 40 .", "concert_hall",
                  "SELECT name FROM singer WHERE age > 40"}};
  // Example struct order is question, db_id, gold_sql
  ds.examples[0] = Example{"List the name of singer whose age is greater than 40 .",
                           "concert_hall", "SELECT name FROM singer WHERE age > 40"};
  TrainConfig cfg = desk_config();
  cfg.epochs = 200;
  cfg.max_steps = 200;
  cfg.eval_every = 10;
  cfg.eval_max_examples = 1;
  cfg.em_stop = 1.0;
  std::ostringstream metrics;
  const char* ckpt = "/tmp/rasap_overfit_one.ckpt";
  auto result = train(cfg, ds, ckpt, metrics);
  CHECK_FALSE(result.diverged);
  CHECK(result.best_em == 1.0);
  CHECK(result.steps <= 200);

  // the reloaded checkpoint parses the memorized question back to its SQL
  Model model = Model::load(ckpt);
  const Schema& s = ds.schemas.at("concert_hall");
  const std::string sql = model.parse_to_sql(ds.examples[0].question, s);
  auto gold = parse_sql(ds.examples[0].gold_sql, s);
  CHECK(exact_set_match(parse_sql(sql, s), gold, s));
  std::remove(ckpt);
}

TEST_CASE("checkpoint round-trip reproduces the loss exactly") {
  auto schemas = load_schemas(data_path("tables.json"));
  Dataset ds;
  ds.schemas = schemas;
  ds.examples = generate_synthetic(21, 3, schemas);
  TrainConfig cfg = desk_config();
  Vocabulary vocab = build_vocabulary(ds.schemas, ds.examples);
  Model model = Model::build(cfg, std::move(vocab));

  // a few optimizer steps so values are not just the initialization
  Adam opt(cfg.lr_encoder, cfg.lr_decoder);
  const Schema& s = ds.schemas.at(ds.examples[0].db_id);
  auto q = tokenize(ds.examples[0].question);
  auto rels = build_relation_matrix(q, s);
  auto gold = parse_sql(ds.examples[0].gold_sql, s);
  for (int i = 0; i < 3; ++i) {
    model.params->zero_grad();
    auto enc = encode(q, s, rels, model.vocab, *model.params, model.encoder);
    auto tl = training_loss(gold, enc, q, s, *model.params, model.decoder);
    ag::backward(tl.loss);
    opt.step(*model.params);
  }
  auto loss_of = [&](const Model& m) {
    auto enc = encode(q, s, rels, m.vocab, *m.params, m.encoder);
    return training_loss(gold, enc, q, s, *m.params, m.decoder).loss->value.data[0];
  };
  const double before = loss_of(model);
  const char* path = "/tmp/rasap_resume.ckpt";
  model.save(path);
  Model reloaded = Model::load(path);
  const double after = loss_of(reloaded);
  CHECK(std::fabs(before - after) <= 1e-9);
  CHECK(reloaded.vocab.size() == model.vocab.size());
  std::remove(path);
}

TEST_CASE("parse_question raises on unknown leaves rather than fabricating values") {
  auto schemas = load_schemas(data_path("tables.json"));
  TrainConfig cfg = desk_config();
  Dataset ds;
  ds.schemas = schemas;
  ds.examples = generate_synthetic(2, 2, schemas);
  Model model = Model::build(cfg, build_vocabulary(ds.schemas, ds.examples));
  const Schema& s = schemas.at("book_club");
  // decoding any question still returns something or NoParse; it never crashes
  auto q = tokenize("completely unrelated words here");
  try {
    auto result = model.parse_question(q, s);
    CHECK(result.tree != nullptr);
  } catch (const NoParseError&) {
    CHECK(true);
  }
}

TEST_SUITE_END();
