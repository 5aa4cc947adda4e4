#include "brook/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace brook {

std::string_view to_string(OpKind k) {
  switch (k) {
    case OpKind::kRead: return "Read";
    case OpKind::kWrite: return "Write";
    case OpKind::kInsert: return "Insert";
    case OpKind::kDelete: return "Delete";
  }
  return "?";
}

DslError::DslError(int line, int column, const std::string& message)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                         ": " + message),
      line_(line),
      column_(column) {}

int Workload::table_index(std::string_view name) const {
  for (size_t i = 0; i < schema.size(); ++i)
    if (schema[i].name == name) return static_cast<int>(i);
  return -1;
}

const TransactionTemplate* Workload::find(std::string_view name) const {
  for (const auto& t : templates)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

std::string trim(std::string_view s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

struct Line {
  int number = 0;
  int indent = 0;
  std::string text;  // trimmed, comment-free
};

std::vector<Line> split_lines(std::string_view src) {
  std::vector<Line> out;
  int number = 0;
  size_t pos = 0;
  while (pos <= src.size()) {
    size_t nl = src.find('\n', pos);
    if (nl == std::string_view::npos) nl = src.size();
    std::string raw(src.substr(pos, nl - pos));
    ++number;
    pos = nl + 1;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    size_t cut = raw.find('#');
    size_t slash = raw.find("//");
    if (slash != std::string::npos && (cut == std::string::npos || slash < cut)) cut = slash;
    if (cut != std::string::npos) raw.resize(cut);
    int indent = 0;
    for (char c : raw) {
      if (c == ' ') indent += 1;
      else if (c == '\t') indent += 4;
      else break;
    }
    std::string text = trim(raw);
    if (text.empty()) {
      if (nl == src.size()) break;
      continue;
    }
    out.push_back({number, indent + 1, text});
    if (nl == src.size()) break;
  }
  return out;
}

// Cursor over a single line used by the statement parsers.
struct Scanner {
  const Line& line;
  size_t pos = 0;

  int column() const { return line.indent + static_cast<int>(pos); }
  [[noreturn]] void fail(const std::string& msg) const { throw DslError(line.number, column(), msg); }

  void skip_ws() {
    while (pos < line.text.size() && std::isspace(static_cast<unsigned char>(line.text[pos]))) ++pos;
  }
  bool at_end() {
    skip_ws();
    return pos >= line.text.size();
  }
  bool peek(char c) {
    skip_ws();
    return pos < line.text.size() && line.text[pos] == c;
  }
  void expect(char c) {
    skip_ws();
    if (pos >= line.text.size() || line.text[pos] != c) fail(std::string("expected '") + c + "'");
    ++pos;
  }
  std::string ident() {
    skip_ws();
    if (pos >= line.text.size() || !is_ident_start(line.text[pos])) fail("expected identifier");
    size_t b = pos;
    while (pos < line.text.size() && is_ident_char(line.text[pos])) ++pos;
    return line.text.substr(b, pos - b);
  }
  bool keyword(std::string_view kw) {
    skip_ws();
    if (line.text.compare(pos, kw.size(), kw) != 0) return false;
    size_t end = pos + kw.size();
    if (end < line.text.size() && is_ident_char(line.text[end])) return false;
    pos = end;
    return true;
  }
  std::uint64_t integer() {
    skip_ws();
    size_t b = pos;
    while (pos < line.text.size() && std::isdigit(static_cast<unsigned char>(line.text[pos]))) ++pos;
    if (b == pos) fail("expected integer");
    return std::stoull(line.text.substr(b, pos - b));
  }
  // Text up to the matching close paren at depth zero, or to ',' at depth zero if stop_at_comma.
  std::string balanced(bool stop_at_comma) {
    skip_ws();
    int depth = 0;
    size_t b = pos;
    while (pos < line.text.size()) {
      char c = line.text[pos];
      if (c == '(' || c == '[') ++depth;
      else if (c == ')' || c == ']') {
        if (depth == 0) break;
        --depth;
      } else if (c == ',' && depth == 0 && stop_at_comma) {
        break;
      }
      ++pos;
    }
    if (pos >= line.text.size()) fail("unbalanced parentheses");
    return trim(line.text.substr(b, pos - b));
  }
};

bool parse_op_kind(const std::string& s, OpKind* out) {
  if (s == "Read") *out = OpKind::kRead;
  else if (s == "Write") *out = OpKind::kWrite;
  else if (s == "Insert") *out = OpKind::kInsert;
  else if (s == "Delete") *out = OpKind::kDelete;
  else return false;
  return true;
}

OpStmt parse_op(Scanner& sc) {
  OpStmt op;
  op.line = sc.line.number;
  std::string first = sc.ident();
  if (sc.peek('=')) {
    sc.expect('=');
    op.output = first;
    first = sc.ident();
  }
  if (!parse_op_kind(first, &op.kind)) sc.fail("unknown operation '" + first + "'");
  sc.expect('(');
  op.table = sc.ident();
  sc.expect(',');
  op.key_expr = sc.balanced(false);
  if (op.key_expr.empty()) sc.fail("empty key expression");
  sc.expect(')');
  while (!sc.at_end()) {
    if (sc.keyword("commutes")) {
      sc.expect('=');
      op.commutative_group = sc.ident();
    } else if (sc.keyword("may_abort")) {
      op.may_user_abort = true;
    } else {
      sc.fail("unexpected text after operation");
    }
  }
  return op;
}

class Parser {
 public:
  explicit Parser(std::vector<Line> lines) : lines_(std::move(lines)) {}

  Workload run() {
    Workload w;
    std::set<std::string> template_names;
    while (i_ < lines_.size()) {
      const Line& ln = lines_[i_];
      Scanner sc{ln};
      if (ln.indent != 1) sc.fail("unexpected indentation");
      if (sc.keyword("Table")) {
        TableRef t;
        t.name = sc.ident();
        if (!sc.keyword("population")) sc.fail("expected population=<int>");
        sc.expect('=');
        t.population = sc.integer();
        if (t.population < 1) sc.fail("population must be at least 1");
        if (!sc.at_end()) sc.fail("unexpected text after table declaration");
        if (w.table_index(t.name) >= 0) sc.fail("duplicate table '" + t.name + "'");
        w.schema.push_back(t);
        ++i_;
        continue;
      }
      TransactionTemplate t;
      if (sc.keyword("Dynamic")) t.kind = TemplateKind::kDynamic;
      if (!sc.keyword("Transaction")) sc.fail("expected 'Table' or 'Transaction'");
      t.name = sc.ident();
      if (!template_names.insert(t.name).second) sc.fail("duplicate transaction '" + t.name + "'");
      sc.expect('(');
      if (!sc.peek(')')) {
        for (;;) {
          t.params.push_back(sc.ident());
          if (sc.peek(',')) {
            sc.expect(',');
            continue;
          }
          break;
        }
      }
      sc.expect(')');
      sc.expect(':');
      ++i_;
      if (!sc.at_end()) {
        Stmt s;
        s.kind = Stmt::Kind::kOp;
        s.op = parse_op(sc);
        t.body.push_back(std::move(s));
      } else {
        if (i_ >= lines_.size() || lines_[i_].indent <= 1) sc.fail("transaction body is empty");
        t.body = block(lines_[i_].indent);
      }
      w.templates.push_back(std::move(t));
    }
    for (auto& t : w.templates) {
      check_tables(t.body, w);
      t.paths = expand_paths(t, w.schema);
    }
    return w;
  }

 private:
  void check_tables(const std::vector<Stmt>& b, const Workload& w) {
    for (const auto& s : b) {
      if (s.kind == Stmt::Kind::kOp) {
        if (w.table_index(s.op.table) < 0) {
          int col = 1;
          for (const auto& ln : lines_)
            if (ln.number == s.op.line) {
              size_t at = ln.text.find(s.op.table);
              col = ln.indent + static_cast<int>(at == std::string::npos ? 0 : at);
            }
          throw DslError(s.op.line, col, "undeclared table '" + s.op.table + "'");
        }
      }
      check_tables(s.then_block, w);
      check_tables(s.else_block, w);
      check_tables(s.body, w);
    }
  }

  std::vector<Stmt> block(int indent) {
    std::vector<Stmt> out;
    while (i_ < lines_.size() && lines_[i_].indent >= indent) {
      const Line& ln = lines_[i_];
      Scanner sc{ln};
      if (ln.indent != indent) sc.fail("inconsistent indentation");
      Stmt s;
      s.op.line = ln.number;
      if (sc.keyword("if")) {
        s.kind = Stmt::Kind::kIf;
        std::string rest = trim(std::string_view(ln.text).substr(sc.pos));
        if (rest.empty() || rest.back() != ':') sc.fail("expected ':' after if predicate");
        rest.pop_back();
        s.predicate = trim(rest);
        if (s.predicate.empty()) sc.fail("empty predicate");
        ++i_;
        s.then_block = nested(ln, indent);
        if (i_ < lines_.size() && lines_[i_].indent == indent) {
          Scanner es{lines_[i_]};
          if (es.keyword("else")) {
            es.expect(':');
            if (!es.at_end()) es.fail("unexpected text after else");
            const Line& else_line = lines_[i_];
            ++i_;
            s.else_block = nested(else_line, indent);
          }
        }
      } else if (sc.keyword("else")) {
        sc.fail("else without if");
      } else if (sc.keyword("for")) {
        s.kind = Stmt::Kind::kFor;
        s.loop_var = sc.ident();
        if (!sc.keyword("in")) sc.fail("expected 'in'");
        s.loop_param = sc.ident();
        sc.expect('[');
        if (!sc.keyword("max")) sc.fail("expected max=<int>");
        sc.expect('=');
        s.loop_max = static_cast<int>(sc.integer());
        if (s.loop_max < 1) sc.fail("loop bound must be at least 1");
        sc.expect(']');
        sc.expect(':');
        if (!sc.at_end()) sc.fail("unexpected text after loop header");
        ++i_;
        s.body = nested(ln, indent);
      } else {
        s.kind = Stmt::Kind::kOp;
        s.op = parse_op(sc);
        ++i_;
      }
      out.push_back(std::move(s));
    }
    return out;
  }

  std::vector<Stmt> nested(const Line& header, int indent) {
    if (i_ >= lines_.size() || lines_[i_].indent <= indent) {
      Scanner sc{header};
      sc.pos = header.text.size();
      sc.fail("expected an indented block");
    }
    return block(lines_[i_].indent);
  }

  std::vector<Line> lines_;
  size_t i_ = 0;
};

// ---- path expansion ----

struct Scope {
  std::map<std::string, int> vars;  // var -> op index in path
  std::set<std::string> loop_vars;
};

struct PartialPath {
  std::vector<PathChoice> choices;
  std::vector<TemplateOp> ops;
  Scope scope;
  std::vector<Scope> saved;
};

struct Expander {
  const TransactionTemplate& t;
  const std::vector<TableRef>& schema;
  std::set<std::string> all_outputs;
  int next_loop_id = 0;

  int table_id(const std::string& name) const {
    for (size_t i = 0; i < schema.size(); ++i)
      if (schema[i].name == name) return static_cast<int>(i);
    return -1;
  }

  void resolve(const OpStmt& s, const Scope& scope, TemplateOp* op) const {
    const std::string& e = s.key_expr;
    std::set<int> deps;
    std::set<std::string> params;
    size_t i = 0;
    while (i < e.size()) {
      if (!is_ident_start(e[i]) || (i > 0 && (is_ident_char(e[i - 1]) || e[i - 1] == '.'))) {
        ++i;
        continue;
      }
      size_t b = i;
      while (i < e.size() && is_ident_char(e[i])) ++i;
      std::string id = e.substr(b, i - b);
      size_t j = i;
      while (j < e.size() && e[j] == ' ') ++j;
      if (j < e.size() && e[j] == '(') continue;  // opaque function name
      if (auto it = scope.vars.find(id); it != scope.vars.end()) {
        deps.insert(it->second);
      } else if (scope.loop_vars.count(id)) {
        // bound by the enclosing loop; resolved per iteration at runtime
      } else if (std::find(t.params.begin(), t.params.end(), id) != t.params.end()) {
        params.insert(id);
      } else if (all_outputs.count(id)) {
        throw DslError(s.line, 1, "key expression references '" + id + "' before it is produced");
      } else {
        throw DslError(s.line, 1, "undeclared identifier '" + id + "'");
      }
    }
    op->depends_on.assign(deps.begin(), deps.end());
    op->param_refs.assign(params.begin(), params.end());
  }

  void collect_outputs(const std::vector<Stmt>& b) {
    for (const auto& s : b) {
      if (s.kind == Stmt::Kind::kOp && !s.op.output.empty()) all_outputs.insert(s.op.output);
      collect_outputs(s.then_block);
      collect_outputs(s.else_block);
      collect_outputs(s.body);
    }
  }

  std::vector<PartialPath> run_block(const std::vector<Stmt>& b, std::vector<PartialPath> in,
                                     int loop_id, int iteration, const std::string& loop_param) {
    for (const auto& s : b) {
      std::vector<PartialPath> next;
      switch (s.kind) {
        case Stmt::Kind::kOp:
          for (auto& p : in) {
            TemplateOp op;
            op.kind = s.op.kind;
            op.table = s.op.table;
            op.table_id = table_id(s.op.table);
            op.key_expr = s.op.key_expr;
            op.output = s.op.output;
            op.commutative_group = s.op.commutative_group;
            op.may_user_abort = s.op.may_user_abort;
            op.loop_id = loop_id;
            op.loop_iteration = iteration;
            op.loop_param = loop_param;
            op.line = s.op.line;
            resolve(s.op, p.scope, &op);
            if (!op.output.empty()) p.scope.vars[op.output] = static_cast<int>(p.ops.size());
            p.ops.push_back(std::move(op));
            next.push_back(std::move(p));
          }
          break;
        case Stmt::Kind::kIf:
          for (auto& p : in) {
            PartialPath a = p, c = p;
            a.choices.push_back({s.predicate, true});
            c.choices.push_back({s.predicate, false});
            auto ta = run_block(s.then_block, {std::move(a)}, loop_id, iteration, loop_param);
            auto tc = run_block(s.else_block, {std::move(c)}, loop_id, iteration, loop_param);
            for (auto& x : ta) next.push_back(std::move(x));
            for (auto& x : tc) next.push_back(std::move(x));
          }
          break;
        case Stmt::Kind::kFor: {
          if (loop_id >= 0) throw DslError(s.op.line, 1, "nested loops are not supported");
          if (std::find(t.params.begin(), t.params.end(), s.loop_param) == t.params.end())
            throw DslError(s.op.line, 1, "loop over undeclared parameter '" + s.loop_param + "'");
          int id = next_loop_id++;
          next = std::move(in);
          for (int k = 0; k < s.loop_max; ++k) {
            for (auto& p : next) {
              p.saved.push_back(p.scope);
              p.scope.loop_vars.insert(s.loop_var);
            }
            next = run_block(s.body, std::move(next), id, k, s.loop_param);
            // Iteration-local outputs do not escape the iteration.
            for (auto& p : next) {
              p.scope = std::move(p.saved.back());
              p.saved.pop_back();
            }
          }
          break;
        }
      }
      in = std::move(next);
    }
    return in;
  }
};

void print_block(std::ostringstream& os, const std::vector<Stmt>& b, int indent) {
  std::string pad(static_cast<size_t>(indent), ' ');
  for (const auto& s : b) {
    switch (s.kind) {
      case Stmt::Kind::kOp:
        os << pad;
        if (!s.op.output.empty()) os << s.op.output << " = ";
        os << to_string(s.op.kind) << "(" << s.op.table << ", " << s.op.key_expr << ")";
        if (!s.op.commutative_group.empty()) os << " commutes=" << s.op.commutative_group;
        if (s.op.may_user_abort) os << " may_abort";
        os << "\n";
        break;
      case Stmt::Kind::kIf:
        os << pad << "if " << s.predicate << ":\n";
        print_block(os, s.then_block, indent + 2);
        if (!s.else_block.empty()) {
          os << pad << "else:\n";
          print_block(os, s.else_block, indent + 2);
        }
        break;
      case Stmt::Kind::kFor:
        os << pad << "for " << s.loop_var << " in " << s.loop_param << "[max=" << s.loop_max
           << "]:\n";
        print_block(os, s.body, indent + 2);
        break;
    }
  }
}

}  // namespace

std::vector<TemplatePath> expand_paths(const TransactionTemplate& t,
                                       const std::vector<TableRef>& schema) {
  Expander ex{t, schema, {}, 0};
  ex.collect_outputs(t.body);
  auto parts = ex.run_block(t.body, {PartialPath{}}, -1, -1, "");
  std::vector<TemplatePath> out;
  for (size_t i = 0; i < parts.size(); ++i) {
    TemplatePath p;
    p.id = static_cast<int>(i);
    p.choices = std::move(parts[i].choices);
    p.ops = std::move(parts[i].ops);
    out.push_back(std::move(p));
  }
  return out;
}

Workload parse_workload(std::string_view source_text) {
  Parser p(split_lines(source_text));
  return p.run();
}

std::vector<TransactionTemplate> parse_templates(std::string_view source_text) {
  return parse_workload(source_text).templates;
}

std::vector<SchemaError> validate_schema(const std::vector<TransactionTemplate>& templates,
                                         const std::vector<TableRef>& schema) {
  std::vector<SchemaError> errors;
  std::set<std::string> seen;
  for (const auto& t : schema) {
    if (!seen.insert(t.name).second) errors.push_back({"", -1, "duplicate table " + t.name});
    if (t.population < 1) errors.push_back({"", -1, "table " + t.name + " has no population"});
  }
  for (const auto& t : templates) {
    for (const auto& path : t.paths) {
      for (size_t i = 0; i < path.ops.size(); ++i) {
        const auto& op = path.ops[i];
        bool found = std::any_of(schema.begin(), schema.end(),
                                 [&](const TableRef& r) { return r.name == op.table; });
        if (!found)
          errors.push_back({t.name, static_cast<int>(i), "table " + op.table + " not in schema"});
        for (int d : op.depends_on)
          if (d >= static_cast<int>(i))
            errors.push_back({t.name, static_cast<int>(i), "dependency on a later operation"});
      }
    }
  }
  return errors;
}

std::string pretty_print(const TransactionTemplate& t) {
  std::ostringstream os;
  if (t.kind == TemplateKind::kDynamic) os << "Dynamic ";
  os << "Transaction " << t.name << "(";
  for (size_t i = 0; i < t.params.size(); ++i) os << (i ? ", " : "") << t.params[i];
  os << "):\n";
  print_block(os, t.body, 2);
  return os.str();
}

std::string pretty_print(const Workload& w) {
  std::ostringstream os;
  for (const auto& t : w.schema) os << "Table " << t.name << " population=" << t.population << "\n";
  for (const auto& t : w.templates) os << "\n" << pretty_print(t);
  return os.str();
}

}  // namespace brook
