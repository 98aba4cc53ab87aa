use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::cart::{self, TreeNode, TreeParams};
use crate::runner::Dataset;
use crate::space::{Clip, ParameterSpace};

/// Regression tree of per-configuration mean score on the levers.
pub fn fit_tree(ds: &Dataset, max_depth: usize, min_leaf: usize) -> TreeNode {
    let groups = ds.groups();
    let x: Vec<Vec<f64>> = groups.iter().map(|g| g.params.0.clone()).collect();
    let y: Vec<f64> = groups.iter().map(|g| g.mean_score()).collect();
    cart::fit_exhaustive(
        &x,
        &y,
        &TreeParams {
            max_depth: Some(max_depth),
            min_leaf,
            max_features: None,
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub dim: String,
    pub side: Side,
    pub threshold: f64,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let op = match self.side {
            Side::AtMost => "<=",
            Side::Above => ">",
        };
        write!(f, "{} {} {:.4}", self.dim, op, self.threshold)
    }
}

/// A root-to-leaf path with its leaf statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub conditions: Vec<Condition>,
    pub leaf_mean: f64,
    pub leaf_count: usize,
    /// |leaf_mean - global_mean| * leaf_count
    pub effect_mass: f64,
}

impl Rule {
    pub fn describe(&self) -> String {
        if self.conditions.is_empty() {
            return "(all)".to_string();
        }
        self.conditions.iter().map(ToString::to_string).collect::<Vec<_>>().join(" AND ")
    }
}

/// Enumerates leaves, largest effect mass first.
pub fn extract_thresholds(tree: &TreeNode, names: &[&str]) -> Vec<Rule> {
    let global = tree.mean;
    let mut rules = Vec::new();
    collect(tree, names, global, &mut Vec::new(), &mut rules);
    rules.sort_by(|a, b| b.effect_mass.total_cmp(&a.effect_mass));
    rules
}

fn collect(node: &TreeNode, names: &[&str], global: f64, path: &mut Vec<Condition>, out: &mut Vec<Rule>) {
    match &node.split {
        None => out.push(Rule {
            conditions: path.clone(),
            leaf_mean: node.mean,
            leaf_count: node.count,
            effect_mass: (node.mean - global).abs() * node.count as f64,
        }),
        Some(s) => {
            for (side, child) in [(Side::AtMost, &s.left), (Side::Above, &s.right)] {
                path.push(Condition {
                    dim: names[s.dim].to_string(),
                    side,
                    threshold: s.threshold,
                });
                collect(child, names, global, path, out);
                path.pop();
            }
        }
    }
}

/// Indented if/else rendering of the tree.
pub fn render_rules(tree: &TreeNode, names: &[&str]) -> String {
    let mut out = String::new();
    render(tree, names, 0, &mut out);
    out
}

fn render(node: &TreeNode, names: &[&str], depth: usize, out: &mut String) {
    let pad = "  ".repeat(depth);
    match &node.split {
        None => {
            let _ = writeln!(out, "{pad}leaf: mean={:.4} n={}", node.mean, node.count);
        }
        Some(s) => {
            let name = names[s.dim];
            let _ = writeln!(out, "{pad}if {name} <= {:.4}:", s.threshold);
            render(&s.left, names, depth + 1, out);
            let _ = writeln!(out, "{pad}else:  # {name} > {:.4}", s.threshold);
            render(&s.right, names, depth + 1, out);
        }
    }
}

/// A proposed narrowing of the space, with the rule that motivated it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipSuggestion {
    pub clip: Clip,
    pub because: String,
    pub leaf_mean: f64,
    pub leaf_count: usize,
}

/// Suggests clips that cut away low-outcome leaves.
///
/// Every condition on the path to a leaf with mean at most `cutoff` is
/// inverted into a range restriction on its dimension. Suggestions on the
/// same dimension keep the tightest bounds, and empty ranges are dropped.
/// Nothing is applied: the caller decides.
pub fn suggest_clips(rules: &[Rule], space: &ParameterSpace, cutoff: f64) -> Vec<ClipSuggestion> {
    let mut out: Vec<ClipSuggestion> = Vec::new();
    for rule in rules.iter().filter(|r| r.leaf_mean <= cutoff) {
        for cond in &rule.conditions {
            let Some(dim) = space.dim(&cond.dim) else { continue };
            let clip = match cond.side {
                Side::Above => Clip::new(&dim.name, dim.lower, cond.threshold),
                Side::AtMost => Clip::new(&dim.name, cond.threshold, dim.upper),
            };
            if let Some(existing) = out.iter_mut().find(|s| s.clip.dim == clip.dim) {
                existing.clip.lower = existing.clip.lower.max(clip.lower);
                existing.clip.upper = existing.clip.upper.min(clip.upper);
                continue;
            }
            out.push(ClipSuggestion {
                clip,
                because: rule.describe(),
                leaf_mean: rule.leaf_mean,
                leaf_count: rule.leaf_count,
            });
        }
    }
    out.retain(|s| s.clip.lower < s.clip.upper);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit(x: &[Vec<f64>], y: &[f64], depth: usize, min_leaf: usize) -> TreeNode {
        cart::fit_exhaustive(
            x,
            y,
            &TreeParams {
                max_depth: Some(depth),
                min_leaf,
                max_features: None,
            },
        )
    }

    #[test]
    fn planted_threshold_is_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut xs: Vec<f64> = (0..400).map(|_| rng.gen_range(0.0..10.0)).collect();
        let x: Vec<Vec<f64>> = xs.iter().map(|&v| vec![v]).collect();
        let y: Vec<f64> = xs.iter().map(|&v| if v < 5.0 { 1.0 } else { 0.0 }).collect();
        let tree = fit(&x, &y, 1, 1);
        let split = tree.split.as_ref().unwrap();
        xs.sort_by(f64::total_cmp);
        let below = xs.iter().copied().filter(|&v| v < 5.0).fold(f64::MIN, f64::max);
        let above = xs.iter().copied().find(|&v| v >= 5.0).unwrap();
        assert!(split.threshold > below && split.threshold <= above);
    }

    #[test]
    fn single_leaf_gives_one_empty_rule() {
        let tree = fit(&[vec![1.0], vec![2.0]], &[0.5, 0.5], 3, 1);
        let rules = extract_thresholds(&tree, &["x"]);
        assert_eq!(rules.len(), 1);
        assert!(rules[0].conditions.is_empty());
    }

    #[test]
    fn depth_one_gives_complementary_rules() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..20).map(|i| if i < 5 { 1.0 } else { 0.0 }).collect();
        let tree = fit(&x, &y, 1, 1);
        let rules = extract_thresholds(&tree, &["x"]);
        assert_eq!(rules.len(), 2);
        assert_eq!(rules[0].conditions.len(), 1);
        assert_eq!(rules[0].conditions[0].threshold, rules[1].conditions[0].threshold);
        assert_ne!(rules[0].conditions[0].side, rules[1].conditions[0].side);
    }

    #[test]
    fn planted_conjunction_tops_the_ranking() {
        // y = 1 exactly when x0 > 0.6 and x1 > 0.7; brute-force enumeration
        // of the leaves shows the AND leaf carries the largest effect mass.
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..2000).map(|_| vec![rng.gen(), rng.gen(), rng.gen()]).collect();
        let y: Vec<f64> = x.iter().map(|r| f64::from(u8::from(r[0] > 0.6 && r[1] > 0.7))).collect();
        let tree = fit(&x, &y, 2, 5);
        let rules = extract_thresholds(&tree, &["a", "b", "c"]);
        let top = &rules[0];
        assert_eq!(top.leaf_mean, 1.0);
        let dims: Vec<&str> = top.conditions.iter().map(|c| c.dim.as_str()).collect();
        assert!(dims.contains(&"a") && dims.contains(&"b"));
        for c in &top.conditions {
            assert_eq!(c.side, Side::Above);
            let planted = if c.dim == "a" { 0.6 } else { 0.7 };
            assert!((c.threshold - planted).abs() < 0.01);
        }
        let text = render_rules(&tree, &["a", "b", "c"]);
        assert!(text.starts_with("if "));
    }

    #[test]
    fn clips_cut_low_leaves() {
        let space = ParameterSpace::standard();
        let rules = vec![
            Rule {
                conditions: vec![Condition {
                    dim: "PH".into(),
                    side: Side::Above,
                    threshold: 31.0,
                }],
                leaf_mean: 0.08,
                leaf_count: 100,
                effect_mass: 30.0,
            },
            Rule {
                conditions: vec![Condition {
                    dim: "BG".into(),
                    side: Side::AtMost,
                    threshold: 4.0,
                }],
                leaf_mean: 0.07,
                leaf_count: 50,
                effect_mass: 10.0,
            },
        ];
        let clips = suggest_clips(&rules, &space, 0.2);
        assert_eq!(clips[0].clip, Clip::new("PH", 0.0, 31.0));
        assert_eq!(clips[1].clip, Clip::new("BG", 4.0, 20.0));
        assert!(suggest_clips(&rules, &space, 0.05).is_empty());
    }

    #[test]
    fn whole_path_is_clipped() {
        let space = ParameterSpace::standard();
        let cond = |dim: &str, side, threshold| Condition {
            dim: dim.into(),
            side,
            threshold,
        };
        let rules = vec![Rule {
            conditions: vec![cond("PH", Side::Above, 31.0), cond("BH", Side::Above, 18.0)],
            leaf_mean: 0.08,
            leaf_count: 40,
            effect_mass: 12.0,
        }];
        let clips: Vec<Clip> = suggest_clips(&rules, &space, 0.2).into_iter().map(|s| s.clip).collect();
        assert_eq!(clips, vec![Clip::new("PH", 0.0, 31.0), Clip::new("BH", 0.0, 18.0)]);
    }
}
