#pragma once

#include <random>
#include <set>
#include <string>
#include <vector>

#include "rasap/autodiff.hpp"
#include "rasap/executor.hpp"
#include "rasap/param_store.hpp"
#include "rasap/schema.hpp"

namespace rasap::testing {

// Well-conditioned scalar readout for gradient checks: a fixed random linear
// functional of the output. Sum-of-squares over layer-norm outputs is nearly
// scale-invariant, which starves upstream gradients and drowns the check in
// finite-difference noise.
inline ag::Var probe_loss(const ag::Var& y, std::uint64_t seed = 17) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> norm(0.0, 1.0);
  Tensor m(y->value.shape);
  for (double& v : m.data) v = norm(rng);
  return ag::sum_all(ag::mul(y, ag::constant(m)));
}

// Embedding tables initialize at sigma 0.02, which leaves toy-scale
// activations (and some gradient coordinates) below finite-difference noise.
// Gradient checks rescale them to an O(1) operating point first.
inline void boost_embeddings(ParamStore& params, double factor = 40.0) {
  for (const auto& [name, var] : params.params()) {
    if (name.rfind("emb.", 0) == 0 || name.find(".rk") != std::string::npos ||
        name.find(".rv") != std::string::npos) {
      for (double& v : var->value.data) v *= factor;
    }
  }
}

// Two-table schema in the shape of the running book-club example.
inline Schema book_club_schema(bool with_cells = true) {
  Schema s;
  s.db_id = "book_club";
  s.tables = {
      {"book_club", {"book", "club"}},
      {"movie", {"movie"}},
  };
  s.columns = {
      {"book_club_id", {"book", "club", "id"}, 0, ColumnType::Number, true},
      {"year", {"year"}, 0, ColumnType::Number, false},
      {"author_or_editor", {"author", "or", "editor"}, 0, ColumnType::Text, false},
      {"book_title", {"book", "title"}, 0, ColumnType::Text, false},
      {"category", {"category"}, 0, ColumnType::Text, false},
      {"movie_id", {"movie", "id"}, 1, ColumnType::Number, true},
      {"title", {"title"}, 1, ColumnType::Text, false},
      {"movie_year", {"movie", "year"}, 1, ColumnType::Number, false},
      {"book_club_id_fk", {"book", "club", "id", "fk"}, 1, ColumnType::Number, false},
  };
  s.foreign_keys = {{8, 0}};
  if (with_cells) {
    s.cell_values[4] = {"Fiction", "Nonfiction", "Poetry"};
    s.cell_values[3] = {"The Joy Luck Club", "Wild Swans"};
  }
  return s;
}

// Schema mirroring the car-model linking example: the model column carries a
// multi-word cell with parentheses.
inline Schema car_schema() {
  Schema s;
  s.db_id = "car_catalog";
  s.tables = {
      {"car_makers", {"car", "makers"}},
      {"model_list", {"model", "list"}},
  };
  s.columns = {
      {"maker_id", {"maker", "id"}, 0, ColumnType::Number, true},
      {"maker_name", {"maker", "name"}, 0, ColumnType::Text, false},
      {"country", {"country"}, 0, ColumnType::Text, false},
      {"model_id", {"model", "id"}, 1, ColumnType::Number, true},
      {"maker", {"maker"}, 1, ColumnType::Number, false},
      {"model", {"model"}, 1, ColumnType::Text, false},
  };
  s.foreign_keys = {{4, 0}};
  s.cell_values[5] = {"amc hornet sportabout (sw)", "ford pinto", "toyota corolla"};
  s.cell_values[1] = {"amc", "ford", "toyota"};
  return s;
}

// Book-club rows chosen so the running example query returns exactly
// {Fiction, Poetry}: after year > 1989 the Fiction and Poetry groups keep two
// rows each and Nonfiction only one.
inline MiniDatabase book_club_database() {
  MiniDatabase db;
  auto num = [](double v) { return Cell(v); };
  auto txt = [](const char* v) { return Cell(std::string(v)); };
  db.rows_by_table[0] = {
      {num(1), num(1990), txt("alice"), txt("Book A"), txt("Fiction")},
      {num(2), num(1992), txt("bob"), txt("Book B"), txt("Fiction")},
      {num(3), num(1988), txt("carol"), txt("Book C"), txt("Fiction")},
      {num(4), num(1991), txt("dan"), txt("Book D"), txt("Poetry")},
      {num(5), num(1993), txt("erin"), txt("Book E"), txt("Poetry")},
      {num(6), num(1995), txt("frank"), txt("Book F"), txt("Nonfiction")},
  };
  db.rows_by_table[1] = {
      {num(1), txt("Movie X"), num(1999), num(1)},
      {num(2), txt("Movie Y"), num(2001), num(4)},
      {num(3), txt("Movie Z"), num(1997), num(2)},
  };
  return db;
}

// Random rows for differential testing; a small value pool keeps predicates
// selective and null cells appear occasionally.
inline MiniDatabase random_database(const Schema& s, std::mt19937_64& rng) {
  MiniDatabase db;
  std::uniform_int_distribution<int> nrows(0, 8);
  std::uniform_int_distribution<int> num_pool(1, 20);
  std::uniform_int_distribution<int> txt_pool(0, 6);
  std::uniform_int_distribution<int> null_die(0, 9);
  static const char* words[] = {"ash", "birch", "cedar", "dune", "elm", "fern", "gale"};
  for (int t = 0; t < static_cast<int>(s.tables.size()); ++t) {
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(s.columns.size()); ++c)
      if (s.columns[c].table_index == t) cols.push_back(c);
    const int n = nrows(rng);
    auto& rows = db.rows_by_table[t];
    for (int r = 0; r < n; ++r) {
      Row row;
      for (int c : cols) {
        if (null_die(rng) == 0) {
          row.emplace_back(std::monostate{});
        } else if (s.columns[c].type_tag == ColumnType::Number) {
          row.emplace_back(static_cast<double>(num_pool(rng)));
        } else {
          row.emplace_back(std::string(words[txt_pool(rng)]));
        }
      }
      rows.push_back(std::move(row));
    }
  }
  return db;
}

// Random small schema for property tests: 1-3 tables, 2-4 columns each,
// random primary/foreign keys.
inline Schema random_schema(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> ntab(1, 3);
  std::uniform_int_distribution<int> ncol(2, 4);
  std::uniform_int_distribution<int> coin(0, 1);
  Schema s;
  s.db_id = "random";
  const int t = ntab(rng);
  int col_id = 0;
  for (int ti = 0; ti < t; ++ti) {
    s.tables.push_back({"t" + std::to_string(ti), {"t" + std::to_string(ti)}});
    const int c = ncol(rng);
    for (int ci = 0; ci < c; ++ci) {
      ColumnDef col;
      col.original_name = "c" + std::to_string(col_id);
      col.name_tokens = {col.original_name};
      col.table_index = ti;
      col.type_tag = coin(rng) ? ColumnType::Number : ColumnType::Text;
      col.is_primary_key = ci == 0;
      s.columns.push_back(col);
      ++col_id;
    }
  }
  const int nc = static_cast<int>(s.columns.size());
  std::uniform_int_distribution<int> pick(0, nc - 1);
  const int nfk = std::uniform_int_distribution<int>(0, 3)(rng);
  std::set<std::pair<int, int>> used;
  for (int k = 0; k < nfk; ++k) {
    const int a = pick(rng), b = pick(rng);
    if (a == b || used.count({a, b}) || used.count({b, a})) continue;
    used.emplace(a, b);
    s.foreign_keys.emplace_back(a, b);
  }
  return s;
}

}  // namespace rasap::testing
