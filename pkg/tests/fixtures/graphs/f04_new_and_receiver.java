import java.util.ArrayList;
import java.util.List;
public List<String> build(String first) {
    List<String> out = new ArrayList<>();
    out.add(first);
    return out;
}
