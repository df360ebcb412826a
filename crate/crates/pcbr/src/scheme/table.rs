//! Human-readable rendering of a query plan: one column per server, rows
//! grouped by sum size, messages shown as letters with subpacket subscripts
//! ("a3+c2"), the same layout the worked examples use.

use itertools::Itertools;

use crate::scheme::{QueryPlan, SymbolSpec};

/// "a".."z" for K <= 26, otherwise "m1".."mK".
pub fn message_label(message: usize, k: usize) -> String {
    if k <= 26 {
        ((b'a' + (message - 1) as u8) as char).to_string()
    } else {
        format!("m{message}")
    }
}

/// One symbol as "a3+c2": entries in message order, label then index.
pub fn render_symbol(spec: &SymbolSpec, k: usize) -> String {
    spec.entries
        .iter()
        .map(|(&m, &i)| format!("{}{}", message_label(m, k), i))
        .join("+")
}

fn column_rows(plan: &QueryPlan, from: usize, to: usize) -> Vec<Vec<String>> {
    plan.servers
        .iter()
        .map(|list| {
            list[from..to]
                .iter()
                .map(|s| render_symbol(s, plan.params.k))
                .collect()
        })
        .collect()
}

/// Lays out aligned server columns; every server holds the same number of
/// symbols of each sum size, so rows never ragged-edge within a group.
fn layout(plan: &QueryPlan, out: &mut String, from: usize, to: usize) {
    let columns = column_rows(plan, from, to);
    let n = columns.len();
    let widths: Vec<usize> = columns
        .iter()
        .enumerate()
        .map(|(srv, col)| {
            col.iter()
                .map(String::len)
                .chain(std::iter::once(format!("server {}", srv + 1).len()))
                .max()
                .unwrap_or(0)
        })
        .collect();
    let push_row = |out: &mut String, cells: &[String]| {
        let line = cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .join("  ")
            .trim_end()
            .to_string();
        out.push_str("  ");
        out.push_str(&line);
        out.push('\n');
    };
    push_row(
        out,
        &(1..=n).map(|s| format!("server {s}")).collect::<Vec<_>>(),
    );
    push_row(
        out,
        &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>(),
    );
    let rows = columns[0].len();
    let mut last_k = plan.servers[0][from].k();
    for r in 0..rows {
        let k_here = plan.servers[0][from + r].k();
        if k_here != last_k {
            out.push('\n'); // blank line between sum-size groups
            last_k = k_here;
        }
        push_row(
            out,
            &columns.iter().map(|col| col[r].clone()).collect::<Vec<_>>(),
        );
    }
}

/// The full text table for a plan. Two-phase plans render as two sections:
/// the direct retrievals of the always-needed messages, then the residual
/// instance's table.
pub fn render_table(plan: &QueryPlan) -> String {
    let p = &plan.params;
    let window = plan.demand_window();
    let mut out = format!(
        "plan N={} K={} D={} | demand window j={} -> [{}:{}] | L={} | {}\n\n",
        p.n,
        p.k,
        p.d,
        plan.demand_index,
        window[0],
        window[window.len() - 1],
        p.l,
        p.regime.name(),
    );
    match &plan.large_d {
        None => layout(plan, &mut out, 0, plan.servers[0].len()),
        Some(ld) => {
            let labels = ld.common.iter().map(|&i| message_label(i, p.k)).join(", ");
            out.push_str(&format!("phase 1: direct retrieval of {labels}\n"));
            layout(plan, &mut out, 0, ld.phase1_per_server);
            out.push_str(&format!(
                "\nphase 2: residual instance K={} D={} on the remaining messages\n",
                ld.reduced_params.k, ld.reduced_params.d,
            ));
            layout(plan, &mut out, ld.phase1_per_server, plan.servers[0].len());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Params;
    use crate::scheme::build_canonical_plan;

    fn plan(n: usize, k: usize, d: usize, j: usize) -> QueryPlan {
        build_canonical_plan(&Params::derive(n, k, d).unwrap(), j).unwrap()
    }

    #[test]
    fn labels() {
        assert_eq!(message_label(1, 5), "a");
        assert_eq!(message_label(26, 26), "z");
        assert_eq!(message_label(1, 27), "m1");
        assert_eq!(message_label(27, 27), "m27");
    }

    #[test]
    fn table_2_5_2_layout() {
        let text = render_table(&plan(2, 5, 2, 1));
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].contains("N=2 K=5 D=2"));
        assert!(lines[0].contains("[1:2]"));
        assert!(text.contains("server 1"));
        assert!(text.contains("server 2"));
        assert!(text.contains("a3+c2"));
        assert!(text.contains("a7+c4+e4"));
        // 13 symbol rows split 7 / 5 / 1 by two blank separators.
        let blocks: Vec<usize> = text
            .split("\n\n")
            .skip(1) // header
            .map(|b| {
                b.lines()
                    .filter(|l| !l.contains("server") && !l.contains("--"))
                    .count()
            })
            .collect();
        assert_eq!(blocks, vec![7, 5, 1]);
    }

    #[test]
    fn table_2_5_3_two_sections() {
        let text = render_table(&plan(2, 5, 3, 1));
        assert!(text.contains("phase 1: direct retrieval of c"));
        assert!(text.contains("phase 2: residual instance K=4 D=2"));
        assert!(text.contains("c1"));
        // Residual symbols are relabeled to original letters (d, e), never c.
        let phase2 = text.split("phase 2").nth(1).unwrap();
        assert!(phase2.contains('d') || phase2.contains('e'));
    }

    #[test]
    fn rendering_is_deterministic() {
        let a = render_table(&plan(3, 7, 3, 2));
        let b = render_table(&plan(3, 7, 3, 2));
        assert_eq!(a, b);
    }
}
