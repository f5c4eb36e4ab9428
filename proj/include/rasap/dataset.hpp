#pragma once

#include <map>
#include <string>
#include <vector>

#include "rasap/executor.hpp"
#include "rasap/schema.hpp"

namespace rasap {

struct Example {
  std::string question;
  std::string db_id;
  std::string gold_sql;
};

struct Dataset {
  std::map<std::string, Schema> schemas;
  std::vector<Example> examples;
  std::vector<std::pair<Example, std::string>> excluded;  // example, reason
};

// Spider-format tables.json: table_names_original, column_names_original,
// column_types, primary_keys, foreign_keys. The '*' pseudo-column is dropped.
std::map<std::string, Schema> load_schemas(const std::string& tables_json_path);

// Sidecar cell values: { db_id: { "table.column": ["value", ...] } }.
void load_cells(const std::string& cells_json_path, std::map<std::string, Schema>& schemas);

// Examples file: [{"db_id": ..., "question": ..., "query": ...}]; the gold
// key may be "query", "sql", or "gold_sql".
std::vector<Example> load_examples_file(const std::string& path);

// Loads schemas and examples; examples with unknown databases or gold SQL
// outside the grammar are excluded with a reason.
Dataset load_dataset(const std::string& tables_json_path, const std::string& examples_path);

// One <db_id>.json fixture per database in `dir` (missing files are fine).
std::map<std::string, MiniDatabase> load_databases(
    const std::string& dir, const std::map<std::string, Schema>& schemas);

// Fills schema cell values from fixture rows so value linking can fire.
void derive_cells_from_database(Schema& schema, const MiniDatabase& db);

}  // namespace rasap
