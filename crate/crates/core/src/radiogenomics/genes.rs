use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{data_err, Result};

/// Patients × genes expression table.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneExpressionMatrix {
    patients: Vec<String>,
    genes: Vec<String>,
    values: Vec<f64>,
}

fn first_duplicate(names: &[String]) -> Option<&str> {
    let mut seen = HashSet::new();
    names.iter().find(|n| !seen.insert(n.as_str())).map(String::as_str)
}

impl GeneExpressionMatrix {
    pub fn new(patients: Vec<String>, genes: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != patients.len() * genes.len() {
            return Err(data_err(format!(
                "{} values for {} patients × {} genes",
                values.len(),
                patients.len(),
                genes.len()
            )));
        }
        if let Some(d) = first_duplicate(&patients) {
            return Err(data_err(format!("duplicate case id `{d}`")));
        }
        if let Some(d) = first_duplicate(&genes) {
            return Err(data_err(format!("duplicate gene column `{d}`")));
        }
        Ok(Self { patients, genes, values })
    }

    pub fn patients(&self) -> &[String] {
        &self.patients
    }

    pub fn genes(&self) -> &[String] {
        &self.genes
    }

    pub fn n_patients(&self) -> usize {
        self.patients.len()
    }

    pub fn n_genes(&self) -> usize {
        self.genes.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let g = self.genes.len();
        &self.values[i * g..(i + 1) * g]
    }

    pub fn row_of(&self, id: &str) -> Option<&[f64]> {
        self.patients.iter().position(|p| p == id).map(|i| self.row(i))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.genes.len() + j]
    }

    pub fn from_reader(r: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            return Err(data_err("gene table has no header"));
        }
        let genes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut patients = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != genes.len() + 1 {
                return Err(data_err(format!(
                    "gene table row {} has {} cells, expected {}",
                    line + 1,
                    rec.len(),
                    genes.len() + 1
                )));
            }
            patients.push(rec[0].to_string());
            for (j, cell) in rec.iter().skip(1).enumerate() {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    data_err(format!("non-numeric cell `{cell}` at row {}, gene `{}`", line + 1, genes[j]))
                })?;
                values.push(v);
            }
        }
        Self::new(patients, genes, values)
    }

    pub fn to_writer(&self, w: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let mut header = vec!["case_id".to_string()];
        header.extend(self.genes.iter().cloned());
        wtr.write_record(&header)?;
        for (i, p) in self.patients.iter().enumerate() {
            let mut rec = vec![p.clone()];
            rec.extend(self.row(i).iter().map(|v| format!("{v:?}")));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

pub fn load_gene_expression(path: impl AsRef<Path>) -> Result<GeneExpressionMatrix> {
    GeneExpressionMatrix::from_reader(std::fs::File::open(path)?)
}

pub fn write_gene_expression(m: &GeneExpressionMatrix, path: impl AsRef<Path>) -> Result<()> {
    m.to_writer(std::fs::File::create(path)?)
}
