#include "rasap/dataset.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "rasap/sql_parse.hpp"

namespace rasap {

namespace {

std::vector<std::string> name_tokens_of(const std::string& original) {
  std::vector<std::string> out;
  std::string word;
  for (char c : original) {
    if (c == '_' || c == ' ') {
      if (!word.empty()) out.push_back(word);
      word.clear();
    } else {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!word.empty()) out.push_back(word);
  if (out.empty()) out.push_back(original);
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed JSON in " + path + ": " + e.what());
  }
  return j;
}

}  // namespace

std::map<std::string, Schema> load_schemas(const std::string& tables_json_path) {
  nlohmann::json doc = read_json(tables_json_path);
  if (!doc.is_array())
    throw std::runtime_error(tables_json_path + ": expected an array of databases");
  std::map<std::string, Schema> out;
  for (const auto& entry : doc) {
    Schema s;
    s.db_id = entry.at("db_id").get<std::string>();
    for (const auto& name : entry.at("table_names_original")) {
      TableDef t;
      t.original_name = name.get<std::string>();
      t.name_tokens = name_tokens_of(t.original_name);
      s.tables.push_back(std::move(t));
    }
    const auto& col_names = entry.at("column_names_original");
    const auto& col_types = entry.at("column_types");
    // Spider indices include the '*' pseudo-column; build the remap.
    std::map<int, int> remap;
    for (std::size_t i = 0; i < col_names.size(); ++i) {
      const int table = col_names[i][0].get<int>();
      if (table < 0) continue;  // '*'
      ColumnDef c;
      c.original_name = col_names[i][1].get<std::string>();
      c.name_tokens = name_tokens_of(c.original_name);
      c.table_index = table;
      const std::string type =
          i < col_types.size() ? col_types[i].get<std::string>() : "text";
      c.type_tag = (type == "number" || type == "boolean" || type == "time")
                       ? ColumnType::Number
                       : ColumnType::Text;
      if (type == "time" || type == "boolean") c.type_tag = ColumnType::Number;
      remap[static_cast<int>(i)] = static_cast<int>(s.columns.size());
      s.columns.push_back(std::move(c));
    }
    if (entry.contains("primary_keys"))
      for (const auto& pk : entry.at("primary_keys")) {
        auto it = remap.find(pk.get<int>());
        if (it == remap.end())
          throw std::runtime_error(s.db_id + ": primary key index out of range");
        s.columns[it->second].is_primary_key = true;
      }
    if (entry.contains("foreign_keys"))
      for (const auto& fk : entry.at("foreign_keys")) {
        const auto a = remap.find(fk[0].get<int>());
        const auto b = remap.find(fk[1].get<int>());
        if (a == remap.end() || b == remap.end())
          throw std::runtime_error(s.db_id + ": foreign key index out of range");
        s.foreign_keys.emplace_back(a->second, b->second);
      }
    s.validate();
    out.emplace(s.db_id, std::move(s));
  }
  return out;
}

void load_cells(const std::string& cells_json_path, std::map<std::string, Schema>& schemas) {
  nlohmann::json doc = read_json(cells_json_path);
  for (auto db = doc.begin(); db != doc.end(); ++db) {
    auto sit = schemas.find(db.key());
    if (sit == schemas.end()) continue;
    Schema& s = sit->second;
    for (auto col = db.value().begin(); col != db.value().end(); ++col) {
      const std::string& key = col.key();
      const auto dot = key.find('.');
      if (dot == std::string::npos)
        throw std::runtime_error("cells file: key '" + key + "' is not table.column");
      const std::string table = key.substr(0, dot);
      const std::string column = key.substr(dot + 1);
      int found = -1;
      for (int c = 0; c < static_cast<int>(s.columns.size()); ++c) {
        if (s.columns[c].original_name == column &&
            s.tables[s.columns[c].table_index].original_name == table)
          found = c;
      }
      if (found < 0)
        throw std::runtime_error("cells file: unknown column '" + key + "' in " + db.key());
      std::vector<std::string> values;
      for (const auto& v : col.value()) values.push_back(v.get<std::string>());
      s.cell_values[found] = std::move(values);
    }
  }
}

std::vector<Example> load_examples_file(const std::string& path) {
  nlohmann::json doc = read_json(path);
  if (!doc.is_array()) throw std::runtime_error(path + ": expected an array of examples");
  std::vector<Example> out;
  int index = 0;
  for (const auto& entry : doc) {
    Example ex;
    if (!entry.contains("db_id") || !entry.contains("question"))
      throw std::runtime_error(path + ": example " + std::to_string(index) +
                               " missing db_id/question");
    ex.db_id = entry.at("db_id").get<std::string>();
    ex.question = entry.at("question").get<std::string>();
    for (const char* key : {"query", "sql", "gold_sql"})
      if (entry.contains(key)) ex.gold_sql = entry.at(key).get<std::string>();
    if (ex.gold_sql.empty())
      throw std::runtime_error(path + ": example " + std::to_string(index) +
                               " missing gold SQL");
    out.push_back(std::move(ex));
    ++index;
  }
  return out;
}

Dataset load_dataset(const std::string& tables_json_path, const std::string& examples_path) {
  Dataset ds;
  ds.schemas = load_schemas(tables_json_path);
  for (auto& ex : load_examples_file(examples_path)) {
    auto sit = ds.schemas.find(ex.db_id);
    if (sit == ds.schemas.end()) {
      ds.excluded.emplace_back(std::move(ex), "unknown db_id");
      continue;
    }
    try {
      parse_sql(ex.gold_sql, sit->second);
    } catch (const std::exception& e) {
      ds.excluded.emplace_back(std::move(ex), e.what());
      continue;
    }
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

std::map<std::string, MiniDatabase> load_databases(
    const std::string& dir, const std::map<std::string, Schema>& schemas) {
  std::map<std::string, MiniDatabase> out;
  for (const auto& [db_id, schema] : schemas) {
    const std::filesystem::path path = std::filesystem::path(dir) / (db_id + ".json");
    if (!std::filesystem::exists(path)) continue;
    out.emplace(db_id, MiniDatabase::from_json_file(path.string(), schema));
  }
  return out;
}

void derive_cells_from_database(Schema& schema, const MiniDatabase& db) {
  for (const auto& [t, rows] : db.rows_by_table) {
    std::vector<int> cols;
    for (int c = 0; c < static_cast<int>(schema.columns.size()); ++c)
      if (schema.columns[c].table_index == t) cols.push_back(c);
    for (std::size_t k = 0; k < cols.size(); ++k) {
      auto& values = schema.cell_values[cols[k]];
      for (const auto& row : rows) {
        if (cell_is_null(row[k])) continue;
        if (const auto* text = std::get_if<std::string>(&row[k]))
          values.push_back(*text);
        else
          values.push_back(format_number(std::get<double>(row[k])));
      }
    }
  }
  // deduplicate, preserving first occurrence
  for (auto& [col, values] : schema.cell_values) {
    std::set<std::string> seen;
    std::vector<std::string> unique;
    for (auto& v : values)
      if (seen.insert(v).second) unique.push_back(std::move(v));
    values.swap(unique);
  }
}

}  // namespace rasap
