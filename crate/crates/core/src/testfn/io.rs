//! CSV form `kind,a,b,c0,c1,sigma,tau`; a constant stores its value in `c0`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Kind, Piece, PiecewiseFn};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    kind: String,
    a: f64,
    b: f64,
    c0: f64,
    c1: f64,
    sigma: f64,
    tau: f64,
}

fn input_err(e: impl std::fmt::Display) -> Error {
    Error::Input(e.to_string())
}

pub fn write_csv<W: Write>(f: &PiecewiseFn, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in f.pieces() {
        let row = match p.kind {
            Kind::Const { v } => Row {
                kind: "const".into(),
                a: p.a,
                b: p.b,
                c0: v,
                c1: 0.0,
                sigma: 0.0,
                tau: 0.0,
            },
            Kind::AffineLog { c0, c1, sigma, tau } => Row {
                kind: "affinelog".into(),
                a: p.a,
                b: p.b,
                c0,
                c1,
                sigma,
                tau,
            },
        };
        w.serialize(row).map_err(input_err)?;
    }
    w.flush().map_err(input_err)
}

pub fn read_csv<R: Read>(input: R) -> Result<PiecewiseFn> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let mut pieces = Vec::new();
    for (line, rec) in r.deserialize::<Row>().enumerate() {
        let row = rec.map_err(input_err)?;
        let kind = match row.kind.to_ascii_lowercase().as_str() {
            "const" => Kind::Const { v: row.c0 },
            "affinelog" => Kind::AffineLog {
                c0: row.c0,
                c1: row.c1,
                sigma: row.sigma,
                tau: row.tau,
            },
            other => return Err(Error::Input(format!("row {}: unknown piece kind {other:?}", line + 1))),
        };
        pieces.push(Piece { a: row.a, b: row.b, kind });
    }
    PiecewiseFn::new(pieces).map_err(|e| Error::Input(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::optimizer_phi0;

    #[test]
    fn round_trip() {
        let f = optimizer_phi0();
        let mut buf = Vec::new();
        write_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("kind,a,b,c0,c1,sigma,tau\n"));
        assert_eq!(read_csv(buf.as_slice()).unwrap(), f);
    }

    #[test]
    fn bad_rows() {
        assert!(matches!(read_csv("kind,a,b,c0,c1,sigma,tau\nwave,0,1,0,0,0,0\n".as_bytes()), Err(Error::Input(_))));
        assert!(matches!(read_csv("kind,a,b,c0,c1,sigma,tau\nconst,0,1,x,0,0,0\n".as_bytes()), Err(Error::Input(_))));
        assert!(matches!(read_csv("kind,a,b,c0,c1,sigma,tau\n".as_bytes()), Err(Error::Input(_))));
    }
}
