//! Shared pieces of the plain-text file formats (parameter sets, checkpoints,
//! CSV cells).

use crate::{Error, Result, Tensor2};

/// 17 significant digits, enough to round-trip any `f64` exactly.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(token: &str, line: usize) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| Error::format(line, format!("expected a number, found `{token}`")))
}

pub fn parse_uint<T: std::str::FromStr>(token: &str, line: usize) -> Result<T> {
    token
        .parse::<T>()
        .map_err(|_| Error::format(line, format!("expected an integer, found `{token}`")))
}

/// Line cursor over a text document. Blank lines are skipped; line numbers are
/// 1-based for error messages.
pub struct LineReader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
}

impl<'a> LineReader<'a> {
    pub fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    pub fn peek(&self) -> Option<(usize, &'a str)> {
        self.lines.get(self.pos).copied()
    }

    pub fn next_line(&mut self) -> Result<(usize, &'a str)> {
        let line = self.peek().ok_or_else(|| {
            let last = self.lines.last().map_or(0, |l| l.0);
            Error::format(last + 1, "unexpected end of file")
        })?;
        self.pos += 1;
        Ok(line)
    }

    pub fn is_done(&self) -> bool {
        self.pos >= self.lines.len()
    }

    /// Consumes a line that must equal `expected`.
    pub fn expect_exact(&mut self, expected: &str) -> Result<usize> {
        let (n, line) = self.next_line()?;
        if line != expected {
            return Err(Error::format(
                n,
                format!("expected `{expected}`, found `{line}`"),
            ));
        }
        Ok(n)
    }

    /// Consumes `<key> <values...>` and returns the value tokens.
    pub fn expect_key(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next_line()?;
        let mut it = line.split_whitespace();
        if it.next() != Some(key) {
            return Err(Error::format(
                n,
                format!("expected `{key} ...`, found `{line}`"),
            ));
        }
        Ok((n, it.collect()))
    }

    pub fn expect_f64(&mut self, key: &str) -> Result<f64> {
        let (n, vals) = self.expect_key(key)?;
        match vals.as_slice() {
            [v] => parse_f64(v, n),
            _ => Err(Error::format(n, format!("`{key}` takes one value"))),
        }
    }

    pub fn expect_uint<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (n, vals) = self.expect_key(key)?;
        match vals.as_slice() {
            [v] => parse_uint(v, n),
            _ => Err(Error::format(n, format!("`{key}` takes one value"))),
        }
    }

    /// Reads `count` whitespace-separated numbers spanning any number of lines.
    pub fn read_values(&mut self, count: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let (n, line) = self.next_line()?;
            for tok in line.split_whitespace() {
                if out.len() == count {
                    return Err(Error::format(n, "too many values in tensor block"));
                }
                out.push(parse_f64(tok, n)?);
            }
        }
        Ok(out)
    }
}

pub fn write_tensor(out: &mut String, name: &str, t: &Tensor2) {
    out.push_str(&format!("tensor {name} {} {}\n", t.rows(), t.cols()));
    for row in t.row_iter() {
        let cells: Vec<String> = row.iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

/// Reads a `tensor <name> <rows> <cols>` block, checking the name.
pub fn read_tensor(reader: &mut LineReader<'_>, name: &str) -> Result<Tensor2> {
    let (n, vals) = reader.expect_key("tensor")?;
    let [found, rows, cols] = vals.as_slice() else {
        return Err(Error::format(
            n,
            "tensor header needs `<name> <rows> <cols>`",
        ));
    };
    if *found != name {
        return Err(Error::format(
            n,
            format!("expected tensor `{name}`, found `{found}`"),
        ));
    }
    let rows: usize = parse_uint(rows, n)?;
    let cols: usize = parse_uint(cols, n)?;
    let data = reader.read_values(rows * cols)?;
    Tensor2::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.1,
            -1.0 / 3.0,
            1e-300,
            6.02e23,
            f64::MIN_POSITIVE,
            0.0,
            -0.0,
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(1.5), "1.5000000000000000e0");
    }

    #[test]
    fn tensor_block_errors_carry_line_numbers() {
        let text = "tensor w0 1 2\n1.0 abc\n";
        let err = read_tensor(&mut LineReader::new(text), "w0").unwrap_err();
        assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");

        let text = "tensor w0 2 2\n1 2 3\n";
        let err = read_tensor(&mut LineReader::new(text), "w0").unwrap_err();
        assert!(err.to_string().contains("end of file"), "{err}");
    }
}
