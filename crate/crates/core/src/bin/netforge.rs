fn main() {
    netforge::cli::configure_threads();
    let code = netforge::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
