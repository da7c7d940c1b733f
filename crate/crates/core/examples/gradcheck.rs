//! Reverse-mode gradients of a small network expression compared with
//! central finite differences.

use lpfc::tensor::Tensor;

fn loss(x: &Tensor, w: &Tensor) -> lpfc::Result<Tensor> {
    let h = x.matmul(w)?.tanh();
    let n = h.l2_normalize()?;
    Ok(n.mul(&h.sigmoid())?.softmax()?.log().mean_all())
}

fn main() -> lpfc::Result<()> {
    let xv = vec![0.3, -0.7, 1.2, 0.5, -0.1, 0.9];
    let wv = vec![0.2, -0.4, 0.6, 0.1, -0.3, 0.8, 0.5, -0.2, 0.7];
    let x = Tensor::new(xv.clone(), &[2, 3])?;
    let w = Tensor::parameter(wv.clone(), &[3, 3])?;
    let y = loss(&x, &w)?;
    y.backward()?;
    let grad = w.grad().expect("w is a parameter");
    println!("loss = {:.10}", y.item());
    println!("{:>5} {:>16} {:>16} {:>10}", "entry", "analytic", "numeric", "rel.err");
    let h = 1e-6;
    for i in 0..wv.len() {
        let mut up = wv.clone();
        up[i] += h;
        let mut down = wv.clone();
        down[i] -= h;
        let f = |v: Vec<f64>| loss(&x, &Tensor::new(v, &[3, 3]).unwrap()).unwrap().item();
        let numeric = (f(up) - f(down)) / (2.0 * h);
        let rel = (grad[i] - numeric).abs() / grad[i].abs().max(numeric.abs()).max(1e-12);
        println!("{i:>5} {:>16.10} {numeric:>16.10} {rel:>10.2e}", grad[i]);
    }
    Ok(())
}
