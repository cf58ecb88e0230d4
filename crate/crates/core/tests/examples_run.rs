// Every example must keep running against the current API.

macro_rules! example {
    ($name:ident, $path:literal) => {
        #[allow(dead_code)]
        mod $name {
            include!($path);

            #[test]
            fn runs() {
                run().unwrap();
            }
        }
    };
}

example!(kernels, "../examples/kernels.rs");
example!(fit_mogp, "../examples/fit_mogp.rs");
example!(synthetic_posterior, "../examples/synthetic_posterior.rs");
example!(correlation_bounds, "../examples/correlation_bounds.rs");
example!(draw_sample, "../examples/draw_sample.rs");
example!(benchmark_pipeline, "../examples/benchmark_pipeline.rs");
