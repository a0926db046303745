//! Rule-based entity extraction over lexemes.
//!
//! Rules, applied to each identifier not consumed by an import statement:
//!
//! * names after `class` (and Java `interface`, `enum`, `extends`,
//!   `implements`, `new`) are classes;
//! * primitive and boxed type names are data types, collection type names
//!   are data structures;
//! * a dotted chain `a.b.c(...)` labels its last name a function, and its
//!   root a library when the root is imported or a well-known package root,
//!   otherwise a variable;
//! * a plain name followed by `(` is a function; other names are variables;
//! * numeric, string and boolean/null literals are values.
//!
//! Called names found in a small lexicon of well-known algorithms are also
//! labelled `algorithm`.

use std::collections::HashSet;

use crate::corpus::Language;
use crate::lexer::{lex_lines, Lexeme, TokenKind};
use crate::tokenize;

use super::{EntityError, EntityExtractor, EntitySet, EntityType};

const PY_DATA_TYPES: &[&str] = &["int", "float", "str", "bool", "bytes", "bytearray", "complex"];
const PY_DATA_STRUCTURES: &[&str] = &[
    "list",
    "dict",
    "set",
    "tuple",
    "frozenset",
    "deque",
    "defaultdict",
    "OrderedDict",
    "Counter",
    "namedtuple",
    "array",
];
/// Standard-library and widely used third-party package roots.
const PY_LIBRARY_ROOTS: &[&str] = &[
    "os", "sys", "re", "json", "math", "cmath", "time", "datetime", "random", "itertools",
    "collections", "functools", "operator", "subprocess", "shutil", "glob", "fnmatch", "pickle",
    "cPickle", "csv", "socket", "urllib", "urllib2", "urlparse", "hashlib", "hmac", "logging",
    "struct", "string", "threading", "multiprocessing", "io", "StringIO", "copy", "heapq",
    "bisect", "pathlib", "tempfile", "zipfile", "tarfile", "gzip", "bz2", "zlib", "base64",
    "binascii", "uuid", "signal", "platform", "argparse", "optparse", "getopt", "unicodedata",
    "codecs", "decimal", "fractions", "statistics", "textwrap", "types", "typing", "inspect",
    "ast", "gc", "weakref", "xml", "html", "http", "httplib", "email", "smtplib", "ftplib",
    "sqlite3", "calendar", "locale", "getpass", "traceback", "warnings", "contextlib", "queue",
    "Queue", "select", "ssl", "pprint", "timeit", "unittest", "doctest", "ctypes", "builtins",
    "__builtin__", "array", "asyncio", "configparser", "ConfigParser", "secrets", "enum",
    "dataclasses", "abc", "numbers", "difflib", "shlex", "webbrowser", "mimetypes", "imp",
    "importlib", "pkgutil", "site", "sched", "tkinter", "Tkinter", "turtle", "curses",
    "numpy", "np", "scipy", "pandas", "pd", "matplotlib", "plt", "pylab", "sklearn", "requests",
    "django", "flask", "tensorflow", "tf", "torch", "keras", "bs4", "lxml", "yaml", "PIL",
    "cv2", "nltk", "sqlalchemy", "boto3", "selenium", "pygame", "wx", "PyQt4", "PyQt5",
    "scrapy", "simplejson", "MySQLdb", "psycopg2", "redis", "pymongo", "sympy", "networkx",
    "seaborn", "sns", "openpyxl", "xlrd", "xlwt", "paramiko", "twisted", "gevent", "mechanize",
    "win32api", "win32com", "pytz", "dateutil", "jinja2", "werkzeug", "pytest", "mock",
];
const JAVA_PRIMITIVES: &[&str] = &["byte", "short", "int", "long", "float", "double", "boolean", "char"];
const JAVA_BOXED: &[&str] = &[
    "String",
    "Integer",
    "Long",
    "Short",
    "Byte",
    "Float",
    "Double",
    "Boolean",
    "Character",
    "BigInteger",
    "BigDecimal",
    "Number",
];
const JAVA_DATA_STRUCTURES: &[&str] = &[
    "List",
    "ArrayList",
    "LinkedList",
    "Map",
    "HashMap",
    "TreeMap",
    "LinkedHashMap",
    "ConcurrentHashMap",
    "Hashtable",
    "Set",
    "HashSet",
    "TreeSet",
    "LinkedHashSet",
    "Queue",
    "Deque",
    "ArrayDeque",
    "PriorityQueue",
    "Stack",
    "Vector",
    "Collection",
];
const JAVA_PACKAGE_ROOTS: &[&str] = &["java", "javax", "android", "androidx", "org", "com", "net", "sun", "jdk"];
const JAVA_LIBRARY_CLASSES: &[&str] = &[
    "System", "Math", "Arrays", "Collections", "Objects", "Thread", "Files", "Paths", "Executors",
    "Collectors", "Stream", "IntStream", "Pattern", "Runtime", "TimeUnit", "StandardCharsets",
    "Charset", "UUID", "Instant", "LocalDate", "LocalDateTime", "Duration", "Logger",
    "LoggerFactory", "Assert", "Assertions", "Log", "SwingUtilities", "JOptionPane",
    "Toolkit", "ImageIO", "Class", "ClassLoader", "Locale", "Calendar", "Array",
];
const ALGORITHMS: &[&str] = &[
    "sort", "sorted", "argsort", "binarysearch", "binary_search", "bisect", "bisect_left",
    "bisect_right", "insort", "shuffle", "heapify", "heappush", "heappop", "heapreplace",
    "nlargest", "nsmallest", "permutations", "combinations", "gcd", "lcm", "md5", "sha1",
    "sha224", "sha256", "sha384", "sha512", "crc32", "adler32", "dijkstra", "bfs", "dfs",
    "quicksort", "mergesort", "heapsort", "fft", "ifft", "levenshtein", "knapsack",
];

/// Deterministic lexical extractor for Python and Java.
#[derive(Debug, Clone, Copy, Default)]
pub struct LocalLexical;

impl LocalLexical {
    pub fn new() -> Self {
        LocalLexical
    }
}

impl EntityExtractor for LocalLexical {
    fn backend_id(&self) -> String {
        "local-lexical".to_string()
    }

    fn extract(&self, code: &str, language: Language) -> Result<EntitySet, EntityError> {
        if code.trim().is_empty() {
            return Err(EntityError::EmptyCode);
        }
        Ok(Extraction::new(code, language).run())
    }
}

struct Extraction<'a> {
    toks: Vec<Lexeme<'a>>,
    consumed: Vec<bool>,
    language: Language,
    imported: HashSet<&'a str>,
    classes: HashSet<&'a str>,
    out: EntitySet,
}

fn is_capitalized(name: &str) -> bool {
    name.chars().next().is_some_and(char::is_uppercase)
}

fn is_constant(name: &str) -> bool {
    name.chars().filter(|c| c.is_alphabetic()).count() > 1
        && !name.chars().any(char::is_lowercase)
}

impl<'a> Extraction<'a> {
    fn new(code: &'a str, language: Language) -> Self {
        let toks = lex_lines(code, language);
        Extraction {
            consumed: vec![false; toks.len()],
            toks,
            language,
            imported: HashSet::new(),
            classes: HashSet::new(),
            out: EntitySet::new(),
        }
    }

    fn tok(&self, i: usize) -> Option<&Lexeme<'a>> {
        self.toks.get(i)
    }

    fn punct_at(&self, i: usize, p: &str) -> bool {
        self.tok(i).is_some_and(|t| t.is_punct(p))
    }

    fn ident_at(&self, i: usize) -> Option<&'a str> {
        self.tok(i).filter(|t| t.is_ident()).map(|t| t.text)
    }

    fn is_keyword(&self, name: &str) -> bool {
        let kws = tokenize::keywords(self.language);
        match self.language {
            Language::Python => {
                matches!(name, "True" | "False" | "None")
                    || (kws.contains(name) && !matches!(name, "true" | "false" | "none" | "null"))
            }
            Language::Java => kws.contains(name) && name != "none",
        }
    }

    fn is_literal_keyword(&self, name: &str) -> bool {
        match self.language {
            Language::Python => matches!(name, "True" | "False" | "None"),
            Language::Java => matches!(name, "true" | "false" | "null"),
        }
    }

    fn add(&mut self, ty: EntityType, surface: &str) {
        self.out.insert(ty, surface);
    }

    fn type_name(&self, name: &str) -> Option<EntityType> {
        let (types, structures): (&[&str], &[&str]) = match self.language {
            Language::Python => (PY_DATA_TYPES, PY_DATA_STRUCTURES),
            Language::Java => (JAVA_BOXED, JAVA_DATA_STRUCTURES),
        };
        if types.contains(&name) || (self.language == Language::Java && JAVA_PRIMITIVES.contains(&name)) {
            Some(EntityType::DATA_TYPE)
        } else if structures.contains(&name) {
            Some(EntityType::DATA_STRUCTURE)
        } else {
            None
        }
    }

    fn add_call(&mut self, name: &str) {
        self.add(EntityType::FUNCTION, name);
        if ALGORITHMS.contains(&name.to_lowercase().as_str()) {
            self.add(EntityType::ALGORITHM, name);
        }
    }

    fn run(mut self) -> EntitySet {
        self.scan_declarations();
        for i in 0..self.toks.len() {
            if self.consumed[i] {
                continue;
            }
            let tok = self.toks[i];
            match tok.kind {
                TokenKind::Number | TokenKind::Str => self.add(EntityType::VALUE, tok.text),
                TokenKind::Ident => self.ident(i),
                TokenKind::Punct | TokenKind::Newline => {}
            }
        }
        self.out
    }

    /// Consumes import statements and records imported names and declared
    /// classes, so that uses before the declaration resolve the same way.
    fn scan_declarations(&mut self) {
        let mut i = 0;
        while i < self.toks.len() {
            let at_stmt_start = i == 0
                || matches!(self.toks[i - 1].kind, TokenKind::Newline)
                || self.punct_at(i - 1, ";")
                || self.punct_at(i - 1, "{")
                || self.punct_at(i - 1, "}")
                || self.punct_at(i - 1, ":");
            match (self.language, self.ident_at(i)) {
                (Language::Python, Some("import")) if at_stmt_start => i = self.python_import(i),
                (Language::Python, Some("from")) if at_stmt_start => i = self.python_from(i),
                (Language::Java, Some("import")) if at_stmt_start => i = self.java_import(i),
                (Language::Java, Some("package")) if at_stmt_start => i = self.skip_statement(i),
                (_, Some("class")) | (Language::Java, Some("interface" | "enum"))
                    if i == 0 || !self.punct_at(i - 1, ".") =>
                {
                    if let Some(name) = self.ident_at(i + 1) {
                        self.classes.insert(name);
                    }
                    i += 1;
                }
                _ => i += 1,
            }
        }
    }

    fn statement_end(&self, from: usize) -> usize {
        (from..self.toks.len())
            .find(|&j| self.toks[j].kind == TokenKind::Newline || self.toks[j].is_punct(";"))
            .unwrap_or(self.toks.len())
    }

    fn skip_statement(&mut self, start: usize) -> usize {
        let end = self.statement_end(start);
        self.consume(start, end);
        end + 1
    }

    fn consume(&mut self, start: usize, end: usize) {
        for c in &mut self.consumed[start..end.min(self.toks.len())] {
            *c = true;
        }
    }

    /// Idents of a dotted name starting at `i`, and the index after it.
    fn dotted(&self, mut i: usize) -> (Vec<&'a str>, usize) {
        let mut parts = Vec::new();
        while self.punct_at(i, ".") || self.punct_at(i, "...") {
            i += 1;
        }
        while let Some(name) = self.ident_at(i) {
            parts.push(name);
            if self.punct_at(i + 1, ".") && self.ident_at(i + 2).is_some() {
                i += 2;
            } else {
                i += 1;
                break;
            }
        }
        (parts, i)
    }

    fn label_package_path(&mut self, parts: &[&str]) {
        if let Some((root, rest)) = parts.split_first() {
            self.add(EntityType::LIBRARY, root);
            for part in rest {
                self.add(EntityType::MODULE, part);
            }
        }
    }

    // import a.b as c, d
    fn python_import(&mut self, start: usize) -> usize {
        let end = self.statement_end(start);
        let mut i = start + 1;
        while i < end {
            let (parts, next) = self.dotted(i);
            if parts.is_empty() {
                i += 1;
                continue;
            }
            self.label_package_path(&parts);
            i = next;
            if self.ident_at(i) == Some("as") {
                if let Some(alias) = self.ident_at(i + 1) {
                    self.imported.insert(alias);
                }
                i += 2;
            } else {
                self.imported.insert(parts[0]);
            }
        }
        self.consume(start, end);
        end + 1
    }

    // from a.b import c as d, e
    fn python_from(&mut self, start: usize) -> usize {
        let end = self.statement_end(start);
        let relative = self.punct_at(start + 1, ".") || self.punct_at(start + 1, "...");
        let (parts, mut i) = self.dotted(start + 1);
        if relative {
            for part in &parts {
                self.add(EntityType::MODULE, part);
            }
        } else {
            self.label_package_path(&parts);
        }
        if self.ident_at(i) == Some("import") {
            i += 1;
        }
        while i < end {
            match self.ident_at(i) {
                Some("as") => {
                    if let Some(alias) = self.ident_at(i + 1) {
                        self.imported.insert(alias);
                    }
                    i += 2;
                }
                Some(name) => {
                    if self.ident_at(i + 1) != Some("as") {
                        self.imported.insert(name);
                    }
                    i += 1;
                }
                None => i += 1,
            }
        }
        self.consume(start, end);
        end + 1
    }

    // import [static] a.b.C[.member|.*];
    fn java_import(&mut self, start: usize) -> usize {
        let end = self.statement_end(start);
        let mut i = start + 1;
        if self.ident_at(i) == Some("static") {
            i += 1;
        }
        let (parts, _) = self.dotted(i);
        if let Some((root, rest)) = parts.split_first() {
            self.add(EntityType::LIBRARY, root);
            for part in rest {
                if is_capitalized(part) && !is_constant(part) {
                    let ty = self.type_name(part).unwrap_or(EntityType::CLASS);
                    self.add(ty, part);
                } else if !is_constant(part) && !self.statement_last_ident(part, &parts) {
                    self.add(EntityType::MODULE, part);
                }
            }
            if let Some(last) = parts.last() {
                self.imported.insert(last);
            }
        }
        self.consume(start, end);
        end + 1
    }

    /// A lowercase final component of a static import names a member, not a
    /// package.
    fn statement_last_ident(&self, part: &str, parts: &[&str]) -> bool {
        parts.last() == Some(&part) && parts.len() > 1 && parts[..parts.len() - 1].iter().any(|p| is_capitalized(p))
    }

    fn mark_class_after(&mut self, i: usize) -> usize {
        // skip over qualified names like `a.b.C`, labelling the final name
        let (parts, next) = self.dotted(i);
        if let Some(last) = parts.last() {
            match self.type_name(last) {
                Some(ty) => self.add(ty, last),
                None => self.add(EntityType::CLASS, last),
            }
            self.consume(i, next);
        }
        next
    }

    fn keyword(&mut self, i: usize, name: &str) {
        if i > 0 && self.punct_at(i - 1, ".") {
            // `Foo.class`
            return;
        }
        if self.is_literal_keyword(name) {
            self.add(EntityType::VALUE, name);
            return;
        }
        match (self.language, name) {
            (Language::Java, prim) if JAVA_PRIMITIVES.contains(&prim) => {
                self.add(EntityType::DATA_TYPE, prim);
            }
            (_, "class") | (Language::Java, "interface" | "enum" | "new") => {
                self.mark_class_after(i + 1);
                if self.language == Language::Python && self.punct_at(i + 2, "(") {
                    // base classes
                    let mut j = i + 3;
                    while j < self.toks.len() && !self.punct_at(j, ")") {
                        if self.ident_at(j).is_some() && !self.punct_at(j - 1, ".") {
                            j = self.mark_class_after(j);
                        } else {
                            j += 1;
                        }
                    }
                }
            }
            (Language::Java, "extends" | "implements" | "throws") => {
                let mut j = self.mark_class_after(i + 1);
                while self.punct_at(j, ",") {
                    j = self.mark_class_after(j + 1);
                }
            }
            _ => {}
        }
    }

    fn ident(&mut self, i: usize) {
        let name = self.toks[i].text;
        if self.is_keyword(name) {
            self.keyword(i, name);
            return;
        }
        if i > 0 && self.punct_at(i - 1, "@") {
            return;
        }
        let called = |s: &Self, j: usize| s.punct_at(j + 1, "(");
        if i > 0 && self.punct_at(i - 1, ".") {
            // attribute of an arbitrary expression, e.g. `f(x).strip()`
            if called(self, i) {
                self.add_call(name);
            } else {
                self.add(EntityType::VARIABLE, name);
            }
            return;
        }
        let mut chain = vec![i];
        let mut j = i;
        while self.punct_at(j + 1, ".") && self.ident_at(j + 2).is_some() {
            j += 2;
            chain.push(j);
        }
        self.consume(i, j + 1);
        let is_called = called(self, j);
        if chain.len() == 1 {
            self.single(name, is_called);
        } else {
            let names: Vec<&'a str> = chain.iter().map(|&k| self.toks[k].text).collect();
            self.chain(&names, is_called);
        }
    }

    fn single(&mut self, name: &str, called: bool) {
        if let Some(ty) = self.type_name(name) {
            self.add(ty, name);
        } else if self.classes.contains(name) {
            self.add(EntityType::CLASS, name);
        } else if called {
            self.add_call(name);
        } else if self.language == Language::Java && is_capitalized(name) && !is_constant(name) {
            self.add(EntityType::CLASS, name);
        } else if self.language == Language::Python && self.imported.contains(name) {
            self.add(EntityType::LIBRARY, name);
        } else {
            self.add(EntityType::VARIABLE, name);
        }
    }

    fn chain(&mut self, names: &[&'a str], called: bool) {
        let (root, rest) = names.split_first().expect("chain is non-empty");
        let (last, middle) = rest.split_last().expect("chain has at least two names");
        let java = self.language == Language::Java;
        let library_root = if java {
            JAVA_PACKAGE_ROOTS.contains(root) || JAVA_LIBRARY_CLASSES.contains(root) || self.imported.contains(root)
        } else {
            PY_LIBRARY_ROOTS.contains(root) || self.imported.contains(root)
        };
        let package_path = java && JAVA_PACKAGE_ROOTS.contains(root);

        if let Some(ty) = self.type_name(root) {
            self.add(ty, root);
        } else if self.classes.contains(root) && !library_root {
            self.add(EntityType::CLASS, root);
        } else if library_root {
            self.add(EntityType::LIBRARY, root);
        } else if java && is_capitalized(root) && !is_constant(root) {
            self.add(EntityType::CLASS, root);
        } else {
            self.add(EntityType::VARIABLE, root);
        }

        for part in middle {
            let ty = if package_path {
                if is_capitalized(part) && !is_constant(part) {
                    EntityType::CLASS
                } else {
                    EntityType::MODULE
                }
            } else if library_root && !java {
                EntityType::MODULE
            } else {
                EntityType::VARIABLE
            };
            self.add(ty, part);
        }

        if let Some(ty) = self.type_name(last) {
            self.add(ty, last);
        } else if called {
            self.add_call(last);
        } else if java && is_capitalized(last) && !is_constant(last) {
            self.add(EntityType::CLASS, last);
        } else {
            self.add(EntityType::VARIABLE, last);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extract(code: &str, lang: Language) -> EntitySet {
        LocalLexical.extract(code, lang).unwrap()
    }

    fn set(items: &[(EntityType, &[&str])]) -> EntitySet {
        let mut s = EntitySet::new();
        for (ty, surfaces) in items {
            for x in *surfaces {
                s.insert(*ty, x);
            }
        }
        s
    }

    #[test]
    fn listdir_worked_example() {
        assert_eq!(
            extract("print(os.listdir(dname))", Language::Python),
            set(&[
                (EntityType::FUNCTION, &["print", "listdir"]),
                (EntityType::LIBRARY, &["os"]),
                (EntityType::VARIABLE, &["dname"]),
            ])
        );
    }

    #[test]
    fn scipy_matrix_example() {
        assert_eq!(
            extract("x = scipy.matrix([1,2,3]).transpose()", Language::Python),
            set(&[
                (EntityType::FUNCTION, &["matrix", "transpose"]),
                (EntityType::LIBRARY, &["scipy"]),
                (EntityType::VARIABLE, &["x"]),
                (EntityType::VALUE, &["1", "2", "3"]),
            ])
        );
    }

    #[test]
    fn keyword_only_and_empty() {
        assert!(extract("pass", Language::Python).is_empty());
        assert!(matches!(
            LocalLexical.extract("  \n", Language::Python),
            Err(EntityError::EmptyCode)
        ));
    }

    #[test]
    fn comprehension_with_method_call() {
        let got = extract("r+=[e for e in os.listdir(folder) if e.endswith('.c')]", Language::Python);
        assert_eq!(
            got,
            set(&[
                (EntityType::FUNCTION, &["listdir", "endswith"]),
                (EntityType::LIBRARY, &["os"]),
                (EntityType::VARIABLE, &["r", "e", "folder"]),
                (EntityType::VALUE, &[".c"]),
            ])
        );
    }

    #[test]
    fn python_imports_aliases_and_submodules() {
        let got = extract(
            "import numpy as np\nfrom os.path import join\nimport xml.etree.ElementTree as ET\nnp.zeros(3)\njoin(a, b)\nET.parse(f)",
            Language::Python,
        );
        assert!(got.get(EntityType::LIBRARY).contains("numpy"));
        assert!(got.get(EntityType::LIBRARY).contains("np"));
        assert!(got.get(EntityType::LIBRARY).contains("et"));
        assert!(got.get(EntityType::MODULE).contains("path"));
        assert!(got.get(EntityType::MODULE).contains("etree"));
        assert!(got.get(EntityType::FUNCTION).contains("join"));
        assert!(got.get(EntityType::FUNCTION).contains("zeros"));
        assert!(got.get(EntityType::FUNCTION).contains("parse"));
        assert!(!got.get(EntityType::VARIABLE).contains("np"));
    }

    #[test]
    fn python_classes_types_and_algorithms() {
        let got = extract(
            "class Stack(Base):\n    def push(self, x: int):\n        self.items = sorted(list(x))\n",
            Language::Python,
        );
        assert_eq!(got.get(EntityType::CLASS).iter().collect::<Vec<_>>(), ["base", "stack"]);
        assert!(got.get(EntityType::FUNCTION).contains("push"));
        assert!(got.get(EntityType::FUNCTION).contains("sorted"));
        assert!(got.get(EntityType::ALGORITHM).contains("sorted"));
        assert!(got.get(EntityType::DATA_TYPE).contains("int"));
        assert!(got.get(EntityType::DATA_STRUCTURE).contains("list"));
        assert!(got.get(EntityType::VARIABLE).contains("self"));
        assert!(got.get(EntityType::VARIABLE).contains("items"));
    }

    #[test]
    fn python_literal_keywords_are_values() {
        let got = extract("flag = None if x else True", Language::Python);
        assert!(got.get(EntityType::VALUE).contains("none"));
        assert!(got.get(EntityType::VALUE).contains("true"));
    }

    #[test]
    fn java_method() {
        let code = "import java.util.List;\n\
            public class Foo extends Bar implements Runnable {\n\
              @Override public void run() { List<String> xs = new ArrayList<>(); int n = 3;\n\
              System.out.println(helper.compute(n, \"hi\")); Widget w = new Widget(); } }";
        let got = extract(code, Language::Java);
        let has = |ty, s: &str| got.get(ty).contains(s);
        assert!(has(EntityType::LIBRARY, "java"));
        assert!(has(EntityType::MODULE, "util"));
        assert!(has(EntityType::CLASS, "foo"));
        assert!(has(EntityType::CLASS, "bar"));
        assert!(has(EntityType::CLASS, "runnable"));
        assert!(has(EntityType::CLASS, "widget"));
        assert!(has(EntityType::DATA_STRUCTURE, "list"));
        assert!(has(EntityType::DATA_STRUCTURE, "arraylist"));
        assert!(has(EntityType::DATA_TYPE, "string"));
        assert!(has(EntityType::DATA_TYPE, "int"));
        assert!(has(EntityType::FUNCTION, "run"));
        assert!(has(EntityType::FUNCTION, "println"));
        assert!(has(EntityType::FUNCTION, "compute"));
        assert!(has(EntityType::LIBRARY, "system"));
        assert!(has(EntityType::VARIABLE, "helper"));
        assert!(has(EntityType::VARIABLE, "xs"));
        assert!(has(EntityType::VALUE, "3"));
        assert!(has(EntityType::VALUE, "hi"));
        assert!(!has(EntityType::CLASS, "override"));
    }

    #[test]
    fn java_static_import_member_is_not_a_module() {
        let got = extract("import static org.junit.Assert.assertEquals;", Language::Java);
        assert!(got.get(EntityType::LIBRARY).contains("org"));
        assert!(got.get(EntityType::MODULE).contains("junit"));
        assert!(got.get(EntityType::CLASS).contains("assert"));
        assert!(!got.get(EntityType::MODULE).contains("assertequals"));
    }
}
