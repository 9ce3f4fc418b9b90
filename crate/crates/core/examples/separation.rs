// Equivalent plans (the same blocks in another agent order) are priced alike
// by every surrogate, and any two non-equivalent plans are told apart by a
// single well-chosen subset.

use gapr::model::{equivalent, AssignmentPlan};
use gapr::surrogate::{distinguishing_h, evaluate_L, SetIndicatorModel};

pub fn run() -> anyhow::Result<()> {
    let s1 = AssignmentPlan::from_lists(6, &[vec![0, 1], vec![2, 3, 4], vec![5]])?;
    let s2 = AssignmentPlan::from_lists(6, &[vec![5], vec![0, 1], vec![2, 3, 4]])?;
    let s3 = AssignmentPlan::from_lists(6, &[vec![0, 1, 5], vec![2, 3], vec![4]])?;
    anyhow::ensure!(equivalent(&s1, &s2)? && !equivalent(&s1, &s3)?);
    anyhow::ensure!(distinguishing_h(&s1, &s2)?.is_none());

    let h = distinguishing_h(&s1, &s3)?.expect("non-equivalent");
    let model = SetIndicatorModel::unit(h.clone())?;
    let labels: Vec<String> = h.iter().map(|s| s.label()).collect();
    println!(
        "H = {labels:?}: L(s1) = {}, L(s2) = {}, L(s3) = {}",
        evaluate_L(&s1, &model)?,
        evaluate_L(&s2, &model)?,
        evaluate_L(&s3, &model)?
    );
    anyhow::ensure!(evaluate_L(&s1, &model)? != evaluate_L(&s3, &model)?);
    Ok(())
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run()
}
