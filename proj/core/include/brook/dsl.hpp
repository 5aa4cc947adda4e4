#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace brook {

struct TableRef {
  std::string name;
  std::uint64_t population = 1;

  bool operator==(const TableRef&) const = default;
};

enum class OpKind { kRead, kWrite, kInsert, kDelete };

// Insert and Delete count as writes for lock-mode purposes.
constexpr bool is_write(OpKind k) { return k != OpKind::kRead; }
std::string_view to_string(OpKind k);

enum class TemplateKind { kStatic, kDynamic };

struct OpStmt {
  OpKind kind = OpKind::kRead;
  std::string table;
  std::string key_expr;
  std::string output;
  std::string commutative_group;
  bool may_user_abort = false;
  int line = 0;

  bool operator==(const OpStmt& o) const {
    return kind == o.kind && table == o.table && key_expr == o.key_expr && output == o.output &&
           commutative_group == o.commutative_group && may_user_abort == o.may_user_abort;
  }
};

struct Stmt {
  enum class Kind { kOp, kIf, kFor };
  Kind kind = Kind::kOp;
  OpStmt op;
  std::string predicate;
  std::vector<Stmt> then_block;
  std::vector<Stmt> else_block;
  std::string loop_var;
  std::string loop_param;
  int loop_max = 0;
  std::vector<Stmt> body;

  bool operator==(const Stmt&) const = default;
};

// One operation of one expanded execution path.
struct TemplateOp {
  OpKind kind = OpKind::kRead;
  std::string table;
  int table_id = -1;
  std::string key_expr;
  std::string output;
  std::string commutative_group;
  bool may_user_abort = false;
  // Indices (within the same path) of ops whose outputs the key expression reads.
  std::vector<int> depends_on;
  std::vector<std::string> param_refs;
  // Loop expansion: which loop (in source order) and which iteration, or -1.
  int loop_id = -1;
  int loop_iteration = -1;
  std::string loop_param;
  int line = 0;

  bool operator==(const TemplateOp&) const = default;
};

struct PathChoice {
  std::string predicate;
  bool taken = true;

  bool operator==(const PathChoice&) const = default;
};

struct TemplatePath {
  int id = 0;
  std::vector<PathChoice> choices;
  std::vector<TemplateOp> ops;

  bool operator==(const TemplatePath&) const = default;
};

struct TransactionTemplate {
  std::string name;
  std::vector<std::string> params;
  TemplateKind kind = TemplateKind::kStatic;
  std::vector<Stmt> body;
  std::vector<TemplatePath> paths;

  bool operator==(const TransactionTemplate&) const = default;
};

struct Workload {
  std::vector<TableRef> schema;
  std::vector<TransactionTemplate> templates;

  int table_index(std::string_view name) const;
  const TransactionTemplate* find(std::string_view name) const;
};

class DslError : public std::runtime_error {
 public:
  DslError(int line, int column, const std::string& message);
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

struct SchemaError {
  std::string template_name;
  int op_index = -1;
  std::string reason;
};

Workload parse_workload(std::string_view source_text);
std::vector<TransactionTemplate> parse_templates(std::string_view source_text);

std::vector<SchemaError> validate_schema(const std::vector<TransactionTemplate>& templates,
                                         const std::vector<TableRef>& schema);

std::string pretty_print(const TransactionTemplate& t);
std::string pretty_print(const Workload& w);

// Expands the statement tree of `t` into concrete paths, resolving data dependencies.
// Throws DslError on references to unknown or later-defined names.
std::vector<TemplatePath> expand_paths(const TransactionTemplate& t,
                                       const std::vector<TableRef>& schema);

}  // namespace brook
