use std::io;

fn main() {
    let code = rankcf::cli::execute(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
